#include "perispec/class_structure.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>

namespace perispec {

namespace {

// Iterative Tarjan over the support graph; component ids in discovery order.
struct Tarjan {
    const std::vector<std::vector<int>>& adj;
    std::vector<int> index, low, comp;
    std::vector<char> on_stack;
    std::vector<int> stack;
    int next_index = 0, next_comp = 0;

    explicit Tarjan(const std::vector<std::vector<int>>& adj_)
        : adj(adj_),
          index(adj_.size(), -1),
          low(adj_.size(), 0),
          comp(adj_.size(), -1),
          on_stack(adj_.size(), 0) {}

    void run(int root) {
        struct Frame {
            int v;
            size_t edge;
        };
        std::vector<Frame> frames{{root, 0}};
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!frames.empty()) {
            Frame& fr = frames.back();
            if (fr.edge < adj[fr.v].size()) {
                int w = adj[fr.v][fr.edge++];
                if (index[w] == -1) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[fr.v] = std::min(low[fr.v], index[w]);
                }
            } else {
                int v = fr.v;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
                if (low[v] == index[v]) {
                    while (true) {
                        int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp[w] = next_comp;
                        if (w == v) break;
                    }
                    ++next_comp;
                }
            }
        }
    }
};

int gcd_int(int a, int b) { return b == 0 ? a : gcd_int(b, a % b); }

}  // namespace

bool ClassStructure::accesses(int cfrom, int cto) const {
    if (cfrom == cto) return true;
    if (cfrom > cto) return false;  // ids are topologically ordered
    // BFS over the condensation
    std::vector<char> seen(classes.size(), 0);
    std::queue<int> q;
    q.push(cfrom);
    seen[cfrom] = 1;
    while (!q.empty()) {
        int c = q.front();
        q.pop();
        for (int nxt : dag[c]) {
            if (nxt == cto) return true;
            if (!seen[nxt]) {
                seen[nxt] = 1;
                q.push(nxt);
            }
        }
    }
    return false;
}

ClassStructure class_structure(const Kernel& p) {
    const Eigen::Index n = p.size();
    const Eigen::MatrixXd& m = p.entries();

    std::vector<std::vector<int>> adj(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (m(i, j) > 0.0) adj[static_cast<size_t>(i)].push_back(static_cast<int>(j));

    Tarjan tarjan(adj);
    for (int v = 0; v < n; ++v)
        if (tarjan.index[v] == -1) tarjan.run(v);
    const int ncomp = tarjan.next_comp;

    // Canonical topological relabeling: Kahn's algorithm, always emitting the
    // source class containing the globally smallest state index.
    std::vector<std::set<int>> comp_succ(ncomp);
    std::vector<int> indeg(ncomp, 0), min_state(ncomp, static_cast<int>(n));
    for (int v = 0; v < n; ++v) min_state[tarjan.comp[v]] = std::min(min_state[tarjan.comp[v]], v);
    for (int v = 0; v < n; ++v)
        for (int w : adj[static_cast<size_t>(v)]) {
            int a = tarjan.comp[v], b = tarjan.comp[w];
            if (a != b && comp_succ[a].insert(b).second) ++indeg[b];
        }
    using Entry = std::pair<int, int>;  // (min_state, old comp id)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> ready;
    for (int c = 0; c < ncomp; ++c)
        if (indeg[c] == 0) ready.push({min_state[c], c});
    std::vector<int> new_id(ncomp, -1);
    int next = 0;
    while (!ready.empty()) {
        int c = ready.top().second;
        ready.pop();
        new_id[c] = next++;
        for (int b : comp_succ[c])
            if (--indeg[b] == 0) ready.push({min_state[b], b});
    }
    if (next != ncomp) throw error("class_structure: condensation is not acyclic");

    ClassStructure cs;
    cs.class_of.resize(static_cast<size_t>(n));
    cs.classes.assign(static_cast<size_t>(ncomp), {});
    for (int v = 0; v < n; ++v) {
        int c = new_id[tarjan.comp[v]];
        cs.class_of[static_cast<size_t>(v)] = c;
        cs.classes[static_cast<size_t>(c)].push_back(v);
    }
    cs.dag.assign(static_cast<size_t>(ncomp), {});
    for (int c = 0; c < ncomp; ++c) {
        std::set<int> out;
        for (int b : comp_succ[c]) out.insert(new_id[b]);
        cs.dag[static_cast<size_t>(new_id[c])].assign(out.begin(), out.end());
    }

    // Per-class spectral radii and periods.
    cs.r = spectral_radius(p);
    cs.class_rho.resize(static_cast<size_t>(ncomp));
    cs.basic.resize(static_cast<size_t>(ncomp));
    cs.period.resize(static_cast<size_t>(ncomp));
    for (int c = 0; c < ncomp; ++c) {
        const std::vector<int>& states = cs.classes[static_cast<size_t>(c)];
        const Eigen::Index sz = static_cast<Eigen::Index>(states.size());
        Eigen::MatrixXd block(sz, sz);
        for (Eigen::Index a = 0; a < sz; ++a)
            for (Eigen::Index b = 0; b < sz; ++b)
                block(a, b) = m(states[static_cast<size_t>(a)], states[static_cast<size_t>(b)]);
        cs.class_rho[static_cast<size_t>(c)] = spectral_radius_matrix(block);
        cs.basic[static_cast<size_t>(c)] =
            std::abs(cs.class_rho[static_cast<size_t>(c)] - cs.r) <= 1e-9 * cs.r && cs.r > 0.0;

        // Period: BFS levels from the smallest state, gcd over internal edges
        // of level(u) + 1 - level(v).
        std::vector<int> pos(static_cast<size_t>(n), -1);
        for (Eigen::Index a = 0; a < sz; ++a) pos[static_cast<size_t>(states[static_cast<size_t>(a)])] = static_cast<int>(a);
        std::vector<int> level(static_cast<size_t>(sz), -1);
        std::queue<int> bfs;
        bfs.push(0);
        level[0] = 0;
        int g = 0;
        bool has_edge = false;
        while (!bfs.empty()) {
            int a = bfs.front();
            bfs.pop();
            int u = states[static_cast<size_t>(a)];
            for (int w : adj[static_cast<size_t>(u)]) {
                int b = pos[static_cast<size_t>(w)];
                if (b < 0) continue;  // edge leaves the class
                has_edge = true;
                if (level[static_cast<size_t>(b)] == -1) {
                    level[static_cast<size_t>(b)] = level[static_cast<size_t>(a)] + 1;
                    bfs.push(b);
                } else {
                    g = gcd_int(g, std::abs(level[static_cast<size_t>(a)] + 1 -
                                            level[static_cast<size_t>(b)]));
                }
            }
        }
        cs.period[static_cast<size_t>(c)] = has_edge ? g : 0;
    }
    return cs;
}

std::vector<int> growth_exponent(const ClassStructure& cs) {
    const int ncomp = cs.num_classes();
    std::vector<int> chain(static_cast<size_t>(ncomp), 0);
    for (int c = ncomp - 1; c >= 0; --c) {
        int best = 0;
        for (int b : cs.dag[static_cast<size_t>(c)])
            best = std::max(best, chain[static_cast<size_t>(b)]);
        chain[static_cast<size_t>(c)] = best + (cs.basic[static_cast<size_t>(c)] ? 1 : 0);
    }
    std::vector<int> j(cs.class_of.size());
    for (size_t x = 0; x < cs.class_of.size(); ++x)
        j[x] = std::max(0, chain[static_cast<size_t>(cs.class_of[x])] - 1);
    return j;
}

}  // namespace perispec
