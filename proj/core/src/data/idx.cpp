#include <cstdio>
#include <fstream>

#include "bd/data.hpp"
#include "bd/errors.hpp"

namespace bd::data {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

uint32_t be32(const std::vector<uint8_t>& buf, size_t off, const std::string& path) {
    if (off + 4 > buf.size())
        throw DataError("'" + path + "': truncated at byte offset " + std::to_string(off) +
                        " (need 4 bytes)");
    return (static_cast<uint32_t>(buf[off]) << 24) | (static_cast<uint32_t>(buf[off + 1]) << 16) |
           (static_cast<uint32_t>(buf[off + 2]) << 8) | static_cast<uint32_t>(buf[off + 3]);
}

void put_be32(std::ofstream& out, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                    static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    constexpr uint32_t kImagesMagic = 0x00000803;
    constexpr uint32_t kLabelsMagic = 0x00000801;

    std::vector<uint8_t> img = read_file(images_path);
    uint32_t magic = be32(img, 0, images_path);
    if (magic != kImagesMagic) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "'%s': bad magic 0x%08x at byte offset 0 (expected image magic 0x%08x)",
                      images_path.c_str(), magic, kImagesMagic);
        throw DataError(msg);
    }
    uint32_t n = be32(img, 4, images_path);
    uint32_t h = be32(img, 8, images_path);
    uint32_t w = be32(img, 12, images_path);
    size_t want = 16 + static_cast<size_t>(n) * h * w;
    if (img.size() != want)
        throw DataError("'" + images_path + "': expected " + std::to_string(want) +
                        " bytes for " + std::to_string(n) + " images, got " +
                        std::to_string(img.size()));

    std::vector<uint8_t> lab = read_file(labels_path);
    uint32_t lmagic = be32(lab, 0, labels_path);
    if (lmagic != kLabelsMagic) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "'%s': bad magic 0x%08x at byte offset 0 (expected label magic 0x%08x)",
                      labels_path.c_str(), lmagic, kLabelsMagic);
        throw DataError(msg);
    }
    uint32_t ln = be32(lab, 4, labels_path);
    if (ln != n)
        throw DataError("'" + labels_path + "': " + std::to_string(ln) + " labels vs " +
                        std::to_string(n) + " images in '" + images_path + "'");
    if (lab.size() != 8 + static_cast<size_t>(ln))
        throw DataError("'" + labels_path + "': expected " + std::to_string(8 + ln) +
                        " bytes, got " + std::to_string(lab.size()));

    Dataset ds;
    ds.count = n;
    ds.channels = 1;
    ds.height = h;
    ds.width = w;
    ds.pixels_u8.assign(img.begin() + 16, img.end());
    ds.labels.resize(n);
    int64_t max_label = 0;
    for (uint32_t i = 0; i < n; ++i) {
        ds.labels[i] = lab[8 + i];
        max_label = std::max<int64_t>(max_label, ds.labels[i]);
    }
    ds.class_count = max_label + 1;
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    if (!ds.byte_backed()) throw ContractError("write_idx: dataset is not byte-backed");
    if (ds.channels != 1) throw ContractError("write_idx: IDX images are single-channel");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot write '" + images_path + "'");
    put_be32(img, 0x00000803);
    put_be32(img, static_cast<uint32_t>(ds.count));
    put_be32(img, static_cast<uint32_t>(ds.height));
    put_be32(img, static_cast<uint32_t>(ds.width));
    img.write(reinterpret_cast<const char*>(ds.pixels_u8.data()),
              static_cast<std::streamsize>(ds.pixels_u8.size()));

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot write '" + labels_path + "'");
    put_be32(lab, 0x00000801);
    put_be32(lab, static_cast<uint32_t>(ds.count));
    for (int64_t i = 0; i < ds.count; ++i) {
        uint8_t y = static_cast<uint8_t>(ds.labels[static_cast<size_t>(i)]);
        lab.write(reinterpret_cast<const char*>(&y), 1);
    }
}

}  // namespace bd::data
