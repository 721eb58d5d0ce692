#include "avi/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "avi/snr_empirical.hpp"

namespace avi {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_label, const std::string& negative_label) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);

    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw std::runtime_error("load_csv: empty file " + path);

    auto first = split_csv_line(lines[0]);
    const int ncols = static_cast<int>(first.size());
    if (ncols < 2) throw std::runtime_error("load_csv: need at least one feature and one label column");

    // Header detection: any non-numeric cell in the first row.
    bool has_header = false;
    for (const auto& cell : first) {
        double tmp;
        if (!parse_double(cell, tmp)) {
            has_header = true;
            break;
        }
    }

    int label_idx = -1;
    if (has_header) {
        for (int j = 0; j < ncols; ++j)
            if (first[static_cast<std::size_t>(j)] == label_column) label_idx = j;
    }
    if (label_idx < 0) {
        double as_num;
        if (parse_double(label_column, as_num)) label_idx = static_cast<int>(as_num);
    }
    if (label_idx < 0 || label_idx >= ncols)
        throw std::runtime_error("load_csv: label column '" + label_column + "' not found");

    std::vector<double> entries;
    std::vector<double> labels;
    const std::size_t start = has_header ? 1 : 0;
    for (std::size_t r = start; r < lines.size(); ++r) {
        const auto cells = split_csv_line(lines[r]);
        if (static_cast<int>(cells.size()) != ncols)
            throw ParseError(static_cast<int>(r), 0, "expected " + std::to_string(ncols) + " fields, got " +
                                                         std::to_string(cells.size()));
        const std::string& lab = cells[static_cast<std::size_t>(label_idx)];
        double y;
        if (lab == positive_label) {
            y = 1.0;
        } else if (negative_label.empty() || lab == negative_label) {
            y = -1.0;
        } else {
            continue;  // class filtered out
        }
        for (int j = 0; j < ncols; ++j) {
            if (j == label_idx) continue;
            double v;
            if (!parse_double(cells[static_cast<std::size_t>(j)], v))
                throw ParseError(static_cast<int>(r), j, "unparseable field '" + cells[static_cast<std::size_t>(j)] + "'");
            entries.push_back(v);
        }
        labels.push_back(y);
    }
    if (labels.empty()) throw std::runtime_error("load_csv: no rows loaded from " + path);

    const int n = static_cast<int>(labels.size());
    const bool has_pos = std::any_of(labels.begin(), labels.end(), [](double y) { return y > 0; });
    const bool has_neg = std::any_of(labels.begin(), labels.end(), [](double y) { return y < 0; });
    if (!has_pos || !has_neg) throw MissingClass("load_csv: only one label class present");

    Dataset ds;
    ds.features = Matrix(n, ncols - 1, std::move(entries));
    ds.labels = std::move(labels);
    ds.name = path;
    return ds;
}

Dataset subsample(const Dataset& ds, int n, std::uint64_t seed) {
    if (n < 1 || n > ds.n()) throw std::invalid_argument("subsample: n out of range");
    std::vector<int> idx(static_cast<std::size_t>(ds.n()));
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(seed, 0);
    for (int i = ds.n() - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(n));
    std::sort(idx.begin(), idx.end());

    Dataset out;
    out.features = Matrix(n, ds.d());
    out.labels.resize(static_cast<std::size_t>(n));
    out.name = ds.name;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ds.d(); ++j) out.features(i, j) = ds.features(idx[static_cast<std::size_t>(i)], j);
        out.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    const bool has_pos = std::any_of(out.labels.begin(), out.labels.end(), [](double y) { return y > 0; });
    const bool has_neg = std::any_of(out.labels.begin(), out.labels.end(), [](double y) { return y < 0; });
    if (!has_pos || !has_neg) throw MissingClass("subsample: only one label class in subset");
    return out;
}

Dataset standardize(const Dataset& ds) {
    if (ds.n() < 2) throw std::invalid_argument("standardize: need at least two rows");
    Dataset out = ds;
    const int n = ds.n(), d = ds.d();
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += ds.features(i, j);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double c = ds.features(i, j) - mean;
            var += c * c;
        }
        var /= n;
        const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
        for (int i = 0; i < n; ++i) out.features(i, j) = (ds.features(i, j) - mean) * scale;
    }
    return out;
}

double log_sigmoid(double t) {
    return t > 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

TargetContract LogRegTarget::contract() const {
    const int n = dataset.n(), d = dataset.d();
    const double inv_prior_var = 1.0 / (prior_scale * prior_scale);
    const Matrix& x = dataset.features;
    const std::vector<double>& y = dataset.labels;

    TargetContract t;
    t.dim = d;
    t.normalized = false;
    t.log_density = [x, y, n, d, inv_prior_var](std::span<const double> z) {
        double lp = 0.0;
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += x(i, j) * z[static_cast<std::size_t>(j)];
            lp += log_sigmoid(y[static_cast<std::size_t>(i)] * dot);
        }
        double zz = 0.0;
        for (int j = 0; j < d; ++j) zz += z[static_cast<std::size_t>(j)] * z[static_cast<std::size_t>(j)];
        return lp - 0.5 * inv_prior_var * zz;
    };
    t.grad_log_density = [x, y, n, d, inv_prior_var](std::span<const double> z) {
        std::vector<double> g(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += x(i, j) * z[static_cast<std::size_t>(j)];
            const double yi = y[static_cast<std::size_t>(i)];
            // d/dt log sigmoid(t) = sigmoid(-t)
            const double w = yi / (1.0 + std::exp(yi * dot));
            for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j)] += w * x(i, j);
        }
        for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j)] -= inv_prior_var * z[static_cast<std::size_t>(j)];
        return g;
    };
    return t;
}

GradEstimate alpha_elbo_grad(const TargetContract& joint, const DiagonalGaussian& q, AlphaParam alpha,
                             std::span<const double> eps) {
    // L_alpha relates to -D_alpha up to the model-evidence constant, so the
    // ascent gradient of L_alpha is the negated doubly-reparameterized
    // divergence gradient with the unnormalized joint in place of p.
    GradEstimate g = g_drep(joint, q, alpha, eps);
    for (auto& v : g.values) v = -v;
    return g;
}

AlphaElboEstimate alpha_elbo_estimate(const TargetContract& joint, const DiagonalGaussian& q,
                                      AlphaParam alpha, std::int64_t n_samples, const RngStream& rng) {
    if (n_samples < 2) throw std::invalid_argument("alpha_elbo_estimate: n_samples must be >= 2");
    if (alpha.regime == AlphaRegime::One)
        throw RegimeUnsupported("alpha_elbo_estimate: no value form at alpha -> 1");

    struct Block {
        std::int64_t count = 0;
        double mean = 0.0;
        double m2 = 0.0;
        std::int64_t nonfinite = 0;
    };
    const std::int64_t bsize = detail::block_size_for(n_samples);
    const std::int64_t nblocks = (n_samples + bsize - 1) / bsize;
    std::vector<Block> blocks(static_cast<std::size_t>(nblocks));
    const int d = q.dim();
    const double a = alpha.value;

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < nblocks; ++b) {
        Block& blk = blocks[static_cast<std::size_t>(b)];
        const std::int64_t lo = b * bsize;
        const std::int64_t hi = std::min(n_samples, lo + bsize);
        std::vector<double> eps(static_cast<std::size_t>(d));
        for (std::int64_t i = lo; i < hi; ++i) {
            RngStream s = rng.split(static_cast<std::uint64_t>(i));
            for (auto& e : eps) e = s.normal();
            const double lr = log_ratio(joint, q, eps);
            double val;
            if (alpha.is_zero_limit()) {
                val = lr;
            } else {
                const double ex = a * lr;
                if (ex > 700.0) {
                    ++blk.nonfinite;
                    continue;
                }
                val = (std::exp(ex) - 1.0) / (a * (1.0 - a));
            }
            ++blk.count;
            const double delta = val - blk.mean;
            blk.mean += delta / static_cast<double>(blk.count);
            blk.m2 += delta * (val - blk.mean);
        }
    }

    std::int64_t count = 0, nonfinite = 0;
    double mean = 0.0, m2 = 0.0;
    for (const auto& blk : blocks) {
        nonfinite += blk.nonfinite;
        if (blk.count == 0) continue;
        const double na = static_cast<double>(count), nb = static_cast<double>(blk.count);
        const double delta = blk.mean - mean;
        mean += delta * nb / (na + nb);
        m2 += blk.m2 + delta * delta * na * nb / (na + nb);
        count += blk.count;
    }
    if (count < 2) throw NonFiniteError("alpha_elbo_estimate: fewer than 2 finite samples");

    AlphaElboEstimate est;
    est.value = mean;
    est.std_error = std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count));
    est.n_samples = count;
    est.nonfinite_count = nonfinite;
    return est;
}

}  // namespace avi
