#include "bd/nn/branched.hpp"

#include <sstream>

#include "bd/errors.hpp"

namespace bd::nn {

namespace {

std::string join_i64(const std::vector<int64_t>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::vector<int64_t> split_i64(const std::string& s) {
    std::vector<int64_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoll(tok));
    return out;
}

}  // namespace

std::string ArchSpec::describe() const {
    std::ostringstream os;
    os << id << ";blocks=" << join_i64(blocks) << ";widths=" << join_i64(widths)
       << ";stem=" << stem_width << ";in=" << in_channels << "x" << in_h << "x" << in_w
       << ";classes=" << classes;
    return os.str();
}

ArchSpec parse_arch_descriptor(const std::string& desc) {
    ArchSpec a;
    std::istringstream is(desc);
    std::string tok;
    bool first = true;
    while (std::getline(is, tok, ';')) {
        if (first) {
            a.id = tok;
            first = false;
            continue;
        }
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw DataError("bad arch descriptor field: " + tok);
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "blocks") a.blocks = split_i64(val);
        else if (key == "widths") a.widths = split_i64(val);
        else if (key == "stem") a.stem_width = std::stoll(val);
        else if (key == "classes") a.classes = std::stoll(val);
        else if (key == "in") {
            char x1 = 0, x2 = 0;
            std::istringstream vs(val);
            vs >> a.in_channels >> x1 >> a.in_h >> x2 >> a.in_w;
            if (x1 != 'x' || x2 != 'x') throw DataError("bad arch descriptor input geometry: " + val);
        } else {
            throw DataError("unknown arch descriptor key: " + key);
        }
    }
    if (a.blocks.empty() || a.blocks.size() != a.widths.size())
        throw DataError("arch descriptor missing blocks/widths: " + desc);
    return a;
}

ArchSpec make_arch(const std::string& id, int64_t classes, int64_t in_channels, int64_t in_h,
                   int64_t in_w) {
    ArchSpec a;
    a.id = id;
    a.classes = classes;
    a.in_channels = in_channels;
    a.in_h = in_h;
    a.in_w = in_w;
    if (id == "tiny-resnet") {
        a.blocks = {1, 1, 1};
        a.widths = {4, 8, 16};
        a.stem_width = 4;
    } else if (id == "resnet20" || id == "resnet32" || id == "resnet44" || id == "resnet56") {
        int64_t n = id == "resnet20" ? 3 : id == "resnet32" ? 5 : id == "resnet44" ? 7 : 9;
        a.blocks = {n, n, n};
        a.widths = {16, 32, 64};
        a.stem_width = 16;
    } else if (id == "resnet18") {
        a.blocks = {2, 2, 2, 2};
        a.widths = {64, 128, 256, 512};
        a.stem_width = 64;
    } else {
        throw ConfigError("unsupported arch '" + id +
                          "' (expected tiny-resnet, resnet20/32/44/56 or resnet18)");
    }
    return a;
}

BranchedModel BranchedModel::build(const ArchSpec& arch, int64_t k_branches, Rng& rng) {
    int64_t g = arch.groups();
    if (g < 2) throw ConfigError("arch needs at least 2 groups");
    if (arch.blocks.size() != arch.widths.size())
        throw ConfigError("arch blocks/widths length mismatch");
    if (k_branches < 0 || k_branches >= g)
        throw ConfigError("k_branches=" + std::to_string(k_branches) +
                          " must satisfy 0 <= K <= G-1 = " + std::to_string(g - 1));

    BranchedModel m;
    m.arch_ = arch;
    m.k_branches_ = k_branches;
    m.stem_ = Conv2d::make(arch.in_channels, arch.stem_width, 3, 1, 1, false, rng);
    m.stem_bn_ = BatchNorm2d::make(arch.stem_width);

    int64_t cin = arch.stem_width;
    for (int64_t gi = 0; gi < g; ++gi) {
        std::vector<BasicBlock> grp;
        int64_t cout = arch.widths[static_cast<size_t>(gi)];
        for (int64_t bi = 0; bi < arch.blocks[static_cast<size_t>(gi)]; ++bi) {
            int64_t stride = (bi == 0 && gi > 0) ? 2 : 1;
            grp.push_back(BasicBlock::make(bi == 0 ? cin : cout, cout, stride, rng));
        }
        cin = cout;
        m.groups_.push_back(std::move(grp));
    }

    // Branch k taps after group k (1-based) and mirrors the remaining groups
    // with a single block each.
    for (int64_t k = 1; k <= k_branches; ++k) {
        Head head;
        int64_t hc = arch.widths[static_cast<size_t>(k - 1)];
        for (int64_t gi = k; gi < g; ++gi) {
            int64_t cout = arch.widths[static_cast<size_t>(gi)];
            head.blocks.push_back(BasicBlock::make(hc, cout, 2, rng));
            hc = cout;
        }
        head.fc = Linear::make(hc, arch.classes, rng);
        m.branch_heads_.push_back(std::move(head));
    }
    m.primary_fc_ = Linear::make(arch.widths.back(), arch.classes, rng);
    return m;
}

BranchOutputs BranchedModel::forward_all(const Tensor& images) {
    if (images.rank() != 4 || images.dim(1) != arch_.in_channels || images.dim(2) != arch_.in_h ||
        images.dim(3) != arch_.in_w)
        throw ContractError("forward_all: batch shape " + shape_str(images.shape()) +
                            " does not match arch input " + std::to_string(arch_.in_channels) +
                            "x" + std::to_string(arch_.in_h) + "x" + std::to_string(arch_.in_w));

    BranchOutputs out;
    out.logits.resize(static_cast<size_t>(classifier_count()));
    out.features.resize(static_cast<size_t>(classifier_count()));

    Tensor h = relu(stem_bn_.forward(stem_.forward(images), training_));
    for (int64_t gi = 0; gi < arch_.groups(); ++gi) {
        for (auto& blk : groups_[static_cast<size_t>(gi)]) h = blk.forward(h, training_);
        int64_t k = gi + 1;  // branch index tapping here
        if (k <= k_branches_) {
            Head& head = branch_heads_[static_cast<size_t>(k - 1)];
            Tensor bh = h;
            for (auto& blk : head.blocks) bh = blk.forward(bh, training_);
            out.features[static_cast<size_t>(k - 1)] = bh;
            out.logits[static_cast<size_t>(k - 1)] = head.fc.forward(global_avg_pool(bh));
        }
    }
    out.features.back() = h;
    out.logits.back() = primary_fc_.forward(global_avg_pool(h));
    return out;
}

BranchedModel BranchedModel::extract_single(int64_t k) const {
    if (k < 1 || k > classifier_count())
        throw ContractError("extract_single: classifier index " + std::to_string(k) +
                            " out of range [1," + std::to_string(classifier_count()) + "]");

    BranchedModel s;
    s.k_branches_ = 0;
    s.stem_ = stem_.clone();
    s.stem_bn_ = stem_bn_.clone();
    s.primary_fc_ = (k == classifier_count()) ? primary_fc_.clone()
                                              : branch_heads_[static_cast<size_t>(k - 1)].fc.clone();

    ArchSpec a = arch_;
    if (k == classifier_count()) {
        for (const auto& grp : groups_) {
            std::vector<BasicBlock> copy;
            for (const auto& blk : grp) copy.push_back(blk.clone());
            s.groups_.push_back(std::move(copy));
        }
    } else {
        a.id = arch_.id + "#c" + std::to_string(k);
        for (int64_t gi = 0; gi < k; ++gi) {
            std::vector<BasicBlock> copy;
            for (const auto& blk : groups_[static_cast<size_t>(gi)]) copy.push_back(blk.clone());
            s.groups_.push_back(std::move(copy));
        }
        const Head& head = branch_heads_[static_cast<size_t>(k - 1)];
        for (int64_t gi = k; gi < arch_.groups(); ++gi) {
            a.blocks[static_cast<size_t>(gi)] = 1;
            std::vector<BasicBlock> copy;
            copy.push_back(head.blocks[static_cast<size_t>(gi - k)].clone());
            s.groups_.push_back(std::move(copy));
        }
    }
    s.arch_ = a;
    s.training_ = training_;
    return s;
}

std::vector<Param> BranchedModel::params() {
    std::vector<Param> p;
    std::vector<Param> buf;
    stem_.collect("stem", p);
    stem_bn_.collect("stem_bn", p, buf);
    for (size_t gi = 0; gi < groups_.size(); ++gi)
        for (size_t bi = 0; bi < groups_[gi].size(); ++bi)
            groups_[gi][bi].collect("g" + std::to_string(gi) + ".b" + std::to_string(bi), p, buf);
    for (size_t k = 0; k < branch_heads_.size(); ++k) {
        for (size_t bi = 0; bi < branch_heads_[k].blocks.size(); ++bi)
            branch_heads_[k].blocks[bi].collect(
                "br" + std::to_string(k + 1) + ".b" + std::to_string(bi), p, buf);
        branch_heads_[k].fc.collect("br" + std::to_string(k + 1) + ".fc", p);
    }
    primary_fc_.collect("fc", p);
    return p;
}

std::vector<Param> BranchedModel::buffers() {
    std::vector<Param> p;
    std::vector<Param> buf;
    stem_bn_.collect("stem_bn", p, buf);
    for (size_t gi = 0; gi < groups_.size(); ++gi)
        for (size_t bi = 0; bi < groups_[gi].size(); ++bi)
            groups_[gi][bi].collect("g" + std::to_string(gi) + ".b" + std::to_string(bi), p, buf);
    for (size_t k = 0; k < branch_heads_.size(); ++k)
        for (size_t bi = 0; bi < branch_heads_[k].blocks.size(); ++bi)
            branch_heads_[k].blocks[bi].collect(
                "br" + std::to_string(k + 1) + ".b" + std::to_string(bi), p, buf);
    return buf;
}

int64_t BranchedModel::param_count() {
    int64_t n = 0;
    for (const Param& p : params()) n += p.tensor->numel();
    return n;
}

int64_t BranchedModel::flop_count() const {
    int64_t h = arch_.in_h, w = arch_.in_w;
    int64_t f = stem_.flops(h, w);  // stride-1 pad-1 3x3 stem keeps the extent
    std::vector<std::pair<int64_t, int64_t>> tap;  // spatial extent after each group
    for (const auto& grp : groups_) {
        for (const auto& blk : grp) {
            int64_t oh = 0, ow = 0;
            f += blk.flops(h, w, oh, ow);
            h = oh;
            w = ow;
        }
        tap.emplace_back(h, w);
    }
    for (size_t k = 0; k < branch_heads_.size(); ++k) {
        auto [bh, bw] = tap[k];
        for (const auto& blk : branch_heads_[k].blocks) {
            int64_t oh = 0, ow = 0;
            f += blk.flops(bh, bw, oh, ow);
            bh = oh;
            bw = ow;
        }
        f += branch_heads_[k].fc.flops();
    }
    f += primary_fc_.flops();
    return f;
}

CountReport count_params_flops(BranchedModel& m) {
    return {m.param_count(), m.flop_count()};
}

}  // namespace bd::nn
