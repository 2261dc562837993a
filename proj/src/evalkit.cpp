#include "xgoal/evalkit.hpp"

#include "xgoal/cluster.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

namespace xgoal {

F1Scores f1_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
    const std::size_t c = confusion.size();
    F1Scores s;
    s.per_class.assign(c, 0.0);
    std::size_t total = 0, correct = 0;
    std::size_t active = 0;
    double macro = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        if (confusion[k].size() != c) throw ContractViolation("confusion matrix must be square");
        std::size_t tp = confusion[k][k], fn = 0, fp = 0;
        for (std::size_t j = 0; j < c; ++j) {
            total += confusion[k][j];
            if (j != k) {
                fn += confusion[k][j];
                fp += confusion[j][k];
            }
        }
        correct += tp;
        if (tp + fn + fp == 0) continue;
        s.per_class[k] = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        macro += s.per_class[k];
        ++active;
    }
    s.macro_f1 = active ? macro / static_cast<double>(active) : 0.0;
    s.micro_f1 = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return s;
}

F1Scores classify(const DenseMatrix& h, const std::vector<int>& labels, const Split& split, const ClassifierOptions& opts) {
    if (split.train.empty() || split.test.empty()) throw ContractViolation("classify: train and test splits must be nonempty");
    if (labels.size() != h.rows) throw ContractViolation("classify: labels length != embedding rows");
    int max_label = -1;
    std::set<int> train_classes;
    for (std::size_t n : split.train) {
        if (n >= h.rows || labels[n] < 0) throw ContractViolation("classify: unlabeled or out-of-range train node");
        train_classes.insert(labels[n]);
        max_label = std::max(max_label, labels[n]);
    }
    for (std::size_t n : split.test) {
        if (n >= h.rows || labels[n] < 0) throw ContractViolation("classify: unlabeled or out-of-range test node");
        if (!train_classes.count(labels[n]))
            throw ContractViolation("classify: class " + std::to_string(labels[n]) + " absent from train split");
        max_label = std::max(max_label, labels[n]);
    }
    const std::size_t c = static_cast<std::size_t>(max_label + 1);
    const std::size_t d = h.cols;
    const double inv_m = 1.0 / static_cast<double>(split.train.size());

    DenseMatrix w(d, c);
    std::vector<double> b(c, 0.0);
    std::vector<double> z(c);
    for (std::size_t it = 0; it < opts.iterations; ++it) {
        DenseMatrix gw(d, c);
        std::vector<double> gb(c, 0.0);
        for (std::size_t n : split.train) {
            auto x = h.row(n);
            for (std::size_t k = 0; k < c; ++k) z[k] = b[k];
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t k = 0; k < c; ++k) z[k] += x[j] * w(j, k);
            softmax_inplace(z);
            z[static_cast<std::size_t>(labels[n])] -= 1.0;
            for (std::size_t k = 0; k < c; ++k) gb[k] += z[k] * inv_m;
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t k = 0; k < c; ++k) gw(j, k) += x[j] * z[k] * inv_m;
        }
        for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= opts.step * (gw.data[i] + opts.l2 * w.data[i]);
        for (std::size_t k = 0; k < c; ++k) b[k] -= opts.step * gb[k];
    }

    std::vector<std::vector<std::size_t>> conf(c, std::vector<std::size_t>(c, 0));
    for (std::size_t n : split.test) {
        auto x = h.row(n);
        for (std::size_t k = 0; k < c; ++k) z[k] = b[k];
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t k = 0; k < c; ++k) z[k] += x[j] * w(j, k);
        const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
        ++conf[static_cast<std::size_t>(labels[n])][pred];
    }
    return f1_from_confusion(conf);
}

double nmi(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.size() != b.size()) throw ContractViolation("nmi: length mismatch");
    if (a.empty()) return 0.0;
    const double n = static_cast<double>(a.size());
    std::map<std::size_t, double> ca, cb;
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
        joint[{a[i], b[i]}] += 1.0;
    }
    auto entropy = [n](const std::map<std::size_t, double>& m) {
        double h = 0.0;
        for (const auto& [k, c] : m) h -= (c / n) * std::log(c / n);
        return h;
    };
    const double ha = entropy(ca), hb = entropy(cb);
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    double mi = 0.0;
    for (const auto& [key, c] : joint) mi += (c / n) * std::log(c * n / (ca[key.first] * cb[key.second]));
    return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double cluster_eval(const DenseMatrix& h, const std::vector<int>& labels, std::size_t k, Rng& rng) {
    if (k < 1) throw ContractViolation("cluster_eval: k must be >= 1");
    if (labels.size() != h.rows) throw ContractViolation("cluster_eval: labels length != embedding rows");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < h.rows; ++i)
        if (labels[i] >= 0) idx.push_back(i);
    if (idx.empty()) throw ContractViolation("cluster_eval: no labeled nodes");
    DenseMatrix sub(idx.size(), h.cols);
    std::vector<std::size_t> truth(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        auto src = h.row(idx[r]);
        std::copy(src.begin(), src.end(), sub.row(r).begin());
        truth[r] = static_cast<std::size_t>(labels[idx[r]]);
    }
    const auto model = kmeans(sub, std::min(k, sub.rows), rng);
    return nmi(model.assignments, truth);
}

double sim_search(const DenseMatrix& h, const std::vector<int>& labels) {
    if (labels.size() != h.rows) throw ContractViolation("sim_search: labels length != embedding rows");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < h.rows; ++i)
        if (labels[i] >= 0) idx.push_back(i);
    if (idx.size() < 6) throw ContractViolation("sim_search: need at least 6 labeled nodes");

    std::vector<double> norms(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) norms[r] = std::max(norm2(h.row(idx[r])), kFloor);

    double total = 0.0;
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        sims.clear();
        for (std::size_t s = 0; s < idx.size(); ++s) {
            if (s == r) continue;
            sims.push_back({dot(h.row(idx[r]), h.row(idx[s])) / (norms[r] * norms[s]), idx[s]});
        }
        std::partial_sort(sims.begin(), sims.begin() + 5, sims.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        std::size_t hits = 0;
        for (std::size_t t = 0; t < 5; ++t)
            if (labels[sims[t].second] == labels[idx[r]]) ++hits;
        total += static_cast<double>(hits) / 5.0;
    }
    return total / static_cast<double>(idx.size());
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
        else j[key] = nullptr;
    };
    put("macro_f1", macro_f1);
    put("micro_f1", micro_f1);
    put("nmi", nmi);
    put("sim_at_5", sim_at_5);
    j["per_class_f1"] = per_class_f1;
    j["config"] = {{"seed", seed}, {"n_train", n_train}, {"n_val", n_val}, {"n_test", n_test}, {"k", k}};
    return j.dump(2);
}

std::string EvalReport::table(const std::string& row_label) const {
    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (v) std::snprintf(buf, sizeof(buf), "%8.3f", *v);
        else std::snprintf(buf, sizeof(buf), "%8s", "-");
        return std::string(buf);
    };
    char head[128];
    std::snprintf(head, sizeof(head), "%-16s%8s%8s%8s%8s\n", "Method", "MaF1", "MiF1", "NMI", "Sim@5");
    std::string label = row_label.substr(0, 15);
    label.resize(16, ' ');
    return std::string(head) + label + cell(macro_f1) + cell(micro_f1) + cell(nmi) + cell(sim_at_5) + "\n";
}

}  // namespace xgoal
