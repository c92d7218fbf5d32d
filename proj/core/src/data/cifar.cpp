#include <fstream>

#include "bd/data.hpp"
#include "bd/errors.hpp"

namespace bd::data {

Dataset load_cifar_binary(const std::vector<std::string>& paths, bool coarse) {
    if (paths.empty()) throw DataError("load_cifar_binary: no files");
    constexpr int64_t kPixels = 3 * 32 * 32;

    Dataset ds;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    int64_t max_label = 0;

    for (const std::string& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open '" + path + "'");
        std::vector<uint8_t> buf{std::istreambuf_iterator<char>(in),
                                 std::istreambuf_iterator<char>()};
        // record = label byte(s) + R plane + G plane + B plane
        int64_t label_bytes;
        if (buf.size() % (kPixels + 1) == 0 && buf.size() % (kPixels + 2) != 0) {
            label_bytes = 1;
        } else if (buf.size() % (kPixels + 2) == 0 && buf.size() % (kPixels + 1) != 0) {
            label_bytes = 2;
        } else {
            throw DataError("'" + path + "': size " + std::to_string(buf.size()) +
                            " is not a multiple of a CIFAR record (expected multiples of " +
                            std::to_string(kPixels + 1) + " or " + std::to_string(kPixels + 2) +
                            " bytes)");
        }
        if (coarse && label_bytes != 2)
            throw DataError("'" + path + "': coarse labels need CIFAR-100 records");
        int64_t rec = kPixels + label_bytes;
        int64_t n = static_cast<int64_t>(buf.size()) / rec;
        for (int64_t i = 0; i < n; ++i) {
            const uint8_t* r = buf.data() + i * rec;
            int64_t label = label_bytes == 1 ? r[0] : (coarse ? r[0] : r[1]);
            ds.labels.push_back(label);
            max_label = std::max(max_label, label);
            ds.pixels_u8.insert(ds.pixels_u8.end(), r + label_bytes, r + rec);
        }
        ds.count += n;
    }
    ds.class_count = max_label + 1;
    return ds;
}

}  // namespace bd::data
