#include "bd/tape.hpp"

namespace bd {

namespace {
thread_local Tape* g_current_tape = nullptr;
thread_local bool g_grad_enabled = true;
}  // namespace

TapeScope::TapeScope(Tape& tape) : prev_(g_current_tape) { g_current_tape = &tape; }
TapeScope::~TapeScope() { g_current_tape = prev_; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tape* current_tape() { return g_current_tape; }
bool grad_enabled() { return g_grad_enabled; }

int32_t Tape::emit(BackwardFn backward, std::vector<int32_t> inputs, int64_t out_numel) {
    Node n;
    n.backward = std::move(backward);
    n.inputs = std::move(inputs);
    n.numel = out_numel;
    nodes_.push_back(std::move(n));
    return static_cast<int32_t>(nodes_.size() - 1);
}

int32_t Tape::leaf(const std::shared_ptr<GradState>& sink, int64_t numel) {
    Node n;
    n.sink = sink;
    n.numel = numel;
    nodes_.push_back(std::move(n));
    int32_t id = static_cast<int32_t>(nodes_.size() - 1);
    sink->tape = this;
    sink->node = id;
    sink->epoch = epoch_;
    return id;
}

void Tape::accumulate(int32_t node, const double* g, int64_t n) {
    if (node < 0) return;
    Node& nd = nodes_[static_cast<size_t>(node)];
    if (nd.adj.empty() && n == nd.numel) {
        nd.adj.assign(g, g + n);
        return;
    }
    if (nd.adj.empty()) nd.adj.assign(static_cast<size_t>(nd.numel), 0.0);
    double* a = nd.adj.data();
    for (int64_t i = 0; i < n; ++i) a[i] += g[i];
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    if (loss.node() < 0 || loss.tape() != this || loss.node_epoch() != epoch_)
        throw ContractError("backward on a tensor that is not recorded on this tape (detached or stale)");

    int32_t root = loss.node();
    double one = 1.0;
    accumulate(root, &one, 1);

    for (int32_t i = root; i >= 0; --i) {
        Node& nd = nodes_[static_cast<size_t>(i)];
        if (nd.adj.empty()) continue;  // unreachable from the loss
        if (nd.sink) {
            // Leaf: fold the adjoint into the persistent grad buffer.
            auto& g = nd.sink->grad;
            if (g.empty()) g.assign(nd.adj.size(), 0.0);
            for (size_t j = 0; j < nd.adj.size(); ++j) g[j] += nd.adj[j];
        } else if (nd.backward) {
            nd.backward(*this, nd.adj);
        }
        nd.adj.clear();
    }
}

void Tape::clear() {
    nodes_.clear();
    ++epoch_;
}

int32_t node_id_for(Tape& tape, const Tensor& t) {
    if (t.node() >= 0 && t.tape() == &tape && t.node_epoch() == tape.epoch()) return t.node();
    const auto& gs = t.grad_state();
    if (gs) {
        if (gs->tape == &tape && gs->epoch == tape.epoch() && gs->node >= 0) return gs->node;
        return tape.leaf(gs, t.numel());
    }
    return -1;  // constant (or a result of a cleared tape: treated as constant)
}

}  // namespace bd
