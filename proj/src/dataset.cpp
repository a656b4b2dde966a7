#include "loocmi/dataset.hpp"

#include <cmath>
#include <sstream>

#include "loocmi/error.hpp"
#include "loocmi/io.hpp"
#include "loocmi/rng.hpp"

namespace loocmi {

void Dataset::validate() const {
    if (features.rows() < 2) {
        throw DomainError("dataset needs n >= 2 samples");
    }
    if (labels.size() != features.rows()) {
        throw DomainError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                          std::to_string(labels.size()) + " labels");
    }
    if (!features.allFinite() || !labels.allFinite()) {
        throw DomainError("dataset contains non-finite values");
    }
    if (num_classes > 0) {
        for (Eigen::Index i = 0; i < labels.size(); ++i) {
            const double y = labels(i);
            if (y != std::floor(y) || y < 0 || y >= num_classes) {
                throw DomainError("label of sample " + std::to_string(i) + " is not a class index in [0, " +
                                  std::to_string(num_classes) + ")");
            }
        }
    }
}

std::vector<double> regression_coefficients(std::size_t p) {
    // Fixed ground truth so that training and holdout draws share theta*.
    std::vector<double> theta(p);
    for (std::size_t k = 0; k < p; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        theta[k] = sign / (1.0 + 0.5 * static_cast<double>(k));
    }
    return theta;
}

namespace {

Dataset draw(const std::string& generator_id, std::uint64_t seed, std::uint64_t stream, std::size_t n,
             std::size_t p, const GeneratorOptions& opts) {
    if (n < 2) {
        throw DomainError("generate: n must be >= 2");
    }
    if (p < 1) {
        throw DomainError("generate: p must be >= 1");
    }
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    ds.labels.resize(static_cast<Eigen::Index>(n));
    ds.seed = seed;
    ds.generator_id = generator_id;
    CounterRng rng(seed, stream);

    if (generator_id == "gaussian-blobs") {
        ds.num_classes = 2;
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const int y = static_cast<int>(i % 2);
            const double centre = (y == 1 ? 1.0 : -1.0) * opts.blob_mu;
            for (std::size_t k = 0; k < p; ++k) {
                ds.features(r, static_cast<Eigen::Index>(k)) = centre + rng.normal();
            }
            ds.labels(r) = y;
        }
    } else if (generator_id == "linear-regression") {
        ds.num_classes = 0;
        const auto theta = regression_coefficients(p);
        CounterRng noise(seed, stream + streams::kLabels * 1000);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            double y = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                const double x = rng.normal();
                ds.features(r, static_cast<Eigen::Index>(k)) = x;
                y += x * theta[k];
            }
            ds.labels(r) = y + opts.noise_std * noise.normal();
        }
    } else if (generator_id == "xor-blobs") {
        if (p < 2) {
            throw ConfigError("xor-blobs needs p >= 2");
        }
        ds.num_classes = 2;
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const std::size_t cluster = i % 4;
            const double s0 = (cluster & 1U) ? 1.0 : -1.0;
            const double s1 = (cluster & 2U) ? 1.0 : -1.0;
            for (std::size_t k = 0; k < p; ++k) {
                const double centre = k == 0 ? s0 * opts.xor_mu : (k == 1 ? s1 * opts.xor_mu : 0.0);
                ds.features(r, static_cast<Eigen::Index>(k)) = centre + rng.normal();
            }
            ds.labels(r) = (s0 != s1) ? 1.0 : 0.0;
        }
    } else {
        throw ConfigError("unknown generator_id '" + generator_id +
                          "' (expected gaussian-blobs, linear-regression or xor-blobs)");
    }
    return ds;
}

}  // namespace

Dataset generate(const std::string& generator_id, std::uint64_t seed, std::size_t n, std::size_t p,
                 const GeneratorOptions& opts) {
    return draw(generator_id, seed, streams::kFeatures, n, p, opts);
}

Dataset holdout_test_set(const std::string& generator_id, std::uint64_t holdout_seed, std::size_t m,
                         std::size_t p, const GeneratorOptions& opts) {
    return draw(generator_id, holdout_seed, streams::kHoldout, m, p, opts);
}

LooView::LooView(const Dataset& base, std::size_t removed_index) : base_(&base), removed_(removed_index) {
    if (removed_index >= base.size()) {
        throw DomainError("loo_view: index " + std::to_string(removed_index) + " out of range for n = " +
                          std::to_string(base.size()));
    }
}

std::vector<std::size_t> LooView::indices() const {
    std::vector<std::size_t> idx;
    idx.reserve(size());
    for (std::size_t k = 0; k < size(); ++k) {
        idx.push_back(base_index(k));
    }
    return idx;
}

Matrix LooView::features() const {
    const auto& x = base_->features;
    const auto u = static_cast<Eigen::Index>(removed_);
    Matrix out(x.rows() - 1, x.cols());
    out.topRows(u) = x.topRows(u);
    out.bottomRows(x.rows() - 1 - u) = x.bottomRows(x.rows() - 1 - u);
    return out;
}

Vector LooView::labels() const {
    const auto& y = base_->labels;
    const auto u = static_cast<Eigen::Index>(removed_);
    Vector out(y.size() - 1);
    out.head(u) = y.head(u);
    out.tail(y.size() - 1 - u) = y.tail(y.size() - 1 - u);
    return out;
}

LooView loo_view(const Dataset& ds, std::size_t u) { return LooView(ds, u); }

std::string dataset_to_csv(const Dataset& ds) {
    std::string out;
    for (std::size_t k = 0; k < ds.dim(); ++k) {
        out += "x" + std::to_string(k) + ",";
    }
    out += "y\n";
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
        for (Eigen::Index k = 0; k < ds.features.cols(); ++k) {
            out += io::format_double(ds.features(i, k));
            out += ',';
        }
        if (ds.num_classes > 0) {
            out += std::to_string(static_cast<long long>(ds.labels(i)));
        } else {
            out += io::format_double(ds.labels(i));
        }
        out += '\n';
    }
    return out;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    io::write_file(path, dataset_to_csv(ds));
}

Dataset read_dataset_csv(const std::filesystem::path& path, int num_classes) {
    const std::string file = path.string();
    const auto lines = io::read_lines(path);
    if (lines.empty()) {
        throw ParseError(file, 1, "missing header");
    }
    const auto header = io::split(lines[0], ',');
    if (header.size() < 2 || io::trim(header.back()) != "y") {
        throw ParseError(file, 1, "header must be x0,...,x{p-1},y");
    }
    const std::size_t p = header.size() - 1;
    for (std::size_t k = 0; k < p; ++k) {
        if (io::trim(header[k]) != "x" + std::to_string(k)) {
            throw ParseError(file, 1, "expected column 'x" + std::to_string(k) + "'");
        }
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (io::trim(lines[li]).empty()) {
            continue;
        }
        const auto fields = io::split(lines[li], ',');
        if (fields.size() != p + 1) {
            throw ParseError(file, li + 1,
                             "expected " + std::to_string(p + 1) + " fields, got " + std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(p + 1);
        for (const auto f : fields) {
            row.push_back(io::parse_double(f, file, li + 1));
        }
        rows.push_back(std::move(row));
    }
    Dataset ds;
    ds.generator_id = "csv";
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
    bool integral = true;
    double max_label = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < p; ++k) {
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
        const double y = rows[i][p];
        ds.labels(static_cast<Eigen::Index>(i)) = y;
        integral = integral && y >= 0 && y == std::floor(y) && y < 1024;
        max_label = std::max(max_label, y);
    }
    if (num_classes >= 0) {
        ds.num_classes = num_classes;
    } else {
        ds.num_classes = integral ? std::max(2, static_cast<int>(max_label) + 1) : 0;
    }
    ds.validate();
    return ds;
}

}  // namespace loocmi
