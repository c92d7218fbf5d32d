#include "bd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "bd/errors.hpp"

namespace bd {

namespace {

constexpr uint32_t kVersion = 1;
constexpr uint8_t kTagF64 = 1;
constexpr uint8_t kTagU8 = 2;
constexpr uint8_t kTagF32 = 3;

void put_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("'" + path + "': truncated checkpoint");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& path) {
    uint32_t n = get_u32(in, path);
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw DataError("'" + path + "': truncated string record");
    return s;
}

struct Record {
    uint8_t tag = kTagF64;
    Shape shape;
    std::vector<double> f64;
    std::vector<uint8_t> u8;
};

void write_record(std::ostream& out, const std::string& name, const Record& r) {
    put_string(out, name);
    out.put(static_cast<char>(r.tag));
    put_u32(out, static_cast<uint32_t>(r.shape.size()));
    for (int64_t e : r.shape) put_u32(out, static_cast<uint32_t>(e));
    if (r.tag == kTagU8) {
        out.write(reinterpret_cast<const char*>(r.u8.data()),
                  static_cast<std::streamsize>(r.u8.size()));
    } else if (r.tag == kTagF32) {
        for (double v : r.f64) {
            float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    } else {
        out.write(reinterpret_cast<const char*>(r.f64.data()),
                  static_cast<std::streamsize>(r.f64.size() * sizeof(double)));
    }
}

bool read_record(std::istream& in, const std::string& path, std::string& name, Record& r) {
    if (in.peek() == std::char_traits<char>::eof()) return false;
    name = get_string(in, path);
    int tag = in.get();
    if (tag == std::char_traits<char>::eof()) throw DataError("'" + path + "': truncated record");
    r.tag = static_cast<uint8_t>(tag);
    uint32_t rank = get_u32(in, path);
    r.shape.clear();
    int64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        uint32_t e = get_u32(in, path);
        r.shape.push_back(e);
        n *= e;
    }
    if (r.tag == kTagU8) {
        r.u8.resize(static_cast<size_t>(n));
        if (!in.read(reinterpret_cast<char*>(r.u8.data()), n))
            throw DataError("'" + path + "': truncated u8 payload in '" + name + "'");
    } else if (r.tag == kTagF32) {
        r.f64.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            float f;
            if (!in.read(reinterpret_cast<char*>(&f), 4))
                throw DataError("'" + path + "': truncated f32 payload in '" + name + "'");
            r.f64[static_cast<size_t>(i)] = static_cast<double>(f);
        }
    } else if (r.tag == kTagF64) {
        r.f64.resize(static_cast<size_t>(n));
        if (!in.read(reinterpret_cast<char*>(r.f64.data()),
                     static_cast<std::streamsize>(n * static_cast<int64_t>(sizeof(double)))))
            throw DataError("'" + path + "': truncated f64 payload in '" + name + "'");
    } else {
        throw DataError("'" + path + "': unknown dtype tag " + std::to_string(tag) + " in '" +
                        name + "'");
    }
    return true;
}

Record tensor_record(const Tensor& t, uint8_t tag) {
    Record r;
    r.tag = tag;
    r.shape = t.shape();
    r.f64 = t.vec();
    return r;
}

Record vec_record(const std::vector<double>& v) {
    Record r;
    r.shape = {static_cast<int64_t>(v.size())};
    r.f64 = v;
    return r;
}

}  // namespace

void save_checkpoint(const std::string& path, TrainState& state, const std::string& precision) {
    uint8_t ptag = kTagF64;
    if (precision == "f32") ptag = kTagF32;
    else if (precision != "f64") throw ConfigError("precision must be f64 or f32");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out.write("BDKD", 4);
    put_u32(out, kVersion);
    put_string(out, state.model.arch().describe() + ";k=" + std::to_string(state.k_branches));

    const auto& dspec = state.disc.spec();
    write_record(out, "meta/epoch", vec_record({static_cast<double>(state.epoch)}));
    write_record(out, "meta/disc",
                 vec_record({static_cast<double>(dspec.classes),
                             static_cast<double>(dspec.cond_channels),
                             static_cast<double>(dspec.cond_h), static_cast<double>(dspec.cond_w),
                             dspec.cond_mode == nn::DiscriminatorSpec::Cond::Flatten ? 0.0 : 1.0,
                             static_cast<double>(dspec.pool_to), static_cast<double>(dspec.hidden),
                             static_cast<double>(dspec.layers), dspec.slope, dspec.ln_eps}));
    write_record(out, "meta/opt",
                 vec_record({state.opt_model.lr(), state.opt_model.momentum(),
                             state.opt_model.weight_decay(), state.opt_disc.lr(),
                             state.opt_disc.momentum(), state.opt_disc.weight_decay()}));

    for (const nn::Param& p : state.model.params())
        write_record(out, "model/" + p.name, tensor_record(*p.tensor, ptag));
    for (const nn::Param& p : state.model.buffers())
        write_record(out, "model_buf/" + p.name, tensor_record(*p.tensor, ptag));
    for (const nn::Param& p : state.disc.params())
        write_record(out, "disc/" + p.name, tensor_record(*p.tensor, ptag));

    auto write_velocities = [&](const char* prefix, SgdOptimizer& opt,
                                const std::vector<nn::Param>& params) {
        auto& vel = opt.velocities();
        if (vel.size() != params.size()) return;  // optimizer not yet stepped
        for (size_t i = 0; i < params.size(); ++i) {
            Record r;
            r.tag = ptag;
            r.shape = params[i].tensor->shape();
            r.f64 = vel[i];
            write_record(out, std::string(prefix) + params[i].name, r);
        }
    };
    write_velocities("opt_model/", state.opt_model, state.model.params());
    write_velocities("opt_disc/", state.opt_disc, state.disc.params());

    std::string rng = state.rng.state();
    Record rr;
    rr.tag = kTagU8;
    rr.shape = {static_cast<int64_t>(rng.size())};
    rr.u8.assign(rng.begin(), rng.end());
    write_record(out, "rng/state", rr);
    if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "BDKD", 4) != 0)
        throw DataError("'" + path + "': not a BDKD checkpoint (bad magic)");
    uint32_t version = get_u32(in, path);
    if (version != kVersion)
        throw DataError("'" + path + "': unsupported checkpoint version " +
                        std::to_string(version));
    std::string desc = get_string(in, path);

    int64_t k_branches = 0;
    auto kpos = desc.rfind(";k=");
    if (kpos == std::string::npos) throw DataError("'" + path + "': descriptor missing branch count");
    k_branches = std::stoll(desc.substr(kpos + 3));
    nn::ArchSpec arch = nn::parse_arch_descriptor(desc.substr(0, kpos));

    std::map<std::string, Record> records;
    std::string name;
    Record r;
    while (read_record(in, path, name, r)) records[name] = r;

    auto need = [&](const std::string& n) -> Record& {
        auto it = records.find(n);
        if (it == records.end()) throw DataError("'" + path + "': missing record '" + n + "'");
        return it->second;
    };

    TrainState st;
    st.k_branches = k_branches;
    st.epoch = static_cast<int64_t>(need("meta/epoch").f64.at(0));

    Rng throwaway(0);
    st.model = nn::BranchedModel::build(arch, k_branches, throwaway);

    const auto& dm = need("meta/disc").f64;
    if (dm.size() != 10) throw DataError("'" + path + "': bad meta/disc record");
    nn::DiscriminatorSpec dspec;
    dspec.classes = static_cast<int64_t>(dm[0]);
    dspec.cond_channels = static_cast<int64_t>(dm[1]);
    dspec.cond_h = static_cast<int64_t>(dm[2]);
    dspec.cond_w = static_cast<int64_t>(dm[3]);
    dspec.cond_mode = dm[4] == 0.0 ? nn::DiscriminatorSpec::Cond::Flatten
                                   : nn::DiscriminatorSpec::Cond::AvgPool;
    dspec.pool_to = static_cast<int64_t>(dm[5]);
    dspec.hidden = static_cast<int64_t>(dm[6]);
    dspec.layers = static_cast<int64_t>(dm[7]);
    dspec.slope = dm[8];
    dspec.ln_eps = dm[9];
    st.disc = nn::Discriminator::build(dspec, throwaway);

    const auto& om = need("meta/opt").f64;
    if (om.size() != 6) throw DataError("'" + path + "': bad meta/opt record");
    st.opt_model = SgdOptimizer(om[0], om[1], om[2]);
    st.opt_disc = SgdOptimizer(om[3], om[4], om[5]);

    auto load_into = [&](const std::string& key, Tensor& t) {
        Record& rec = need(key);
        int64_t n = 1;
        for (int64_t e : rec.shape) n *= e;
        if (n != t.numel())
            throw DataError("'" + path + "': record '" + key + "' has " + std::to_string(n) +
                            " values, expected " + std::to_string(t.numel()));
        std::copy(rec.f64.begin(), rec.f64.end(), t.data_mut());
    };
    for (nn::Param p : st.model.params()) load_into("model/" + p.name, *p.tensor);
    for (nn::Param p : st.model.buffers()) load_into("model_buf/" + p.name, *p.tensor);
    for (nn::Param p : st.disc.params()) load_into("disc/" + p.name, *p.tensor);

    auto load_velocities = [&](const char* prefix, SgdOptimizer& opt,
                               const std::vector<nn::Param>& params) {
        if (records.find(std::string(prefix) + params.front().name) == records.end()) return;
        auto& vel = opt.velocities();
        vel.clear();
        for (const nn::Param& p : params) {
            Record& rec = need(std::string(prefix) + p.name);
            vel.push_back(rec.f64);
        }
    };
    load_velocities("opt_model/", st.opt_model, st.model.params());
    load_velocities("opt_disc/", st.opt_disc, st.disc.params());

    Record& rng_rec = need("rng/state");
    st.rng.set_state(std::string(rng_rec.u8.begin(), rng_rec.u8.end()));
    return st;
}

}  // namespace bd
