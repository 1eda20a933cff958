#include "splitdmd/split_dmd.hpp"

#include "splitdmd/errors.hpp"
#include "splitdmd/optdmd.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace splitdmd {

std::string_view to_string(Method method)
{
    switch (method) {
    case Method::standard_dmd:
        return "standard_dmd";
    case Method::optimized_dmd:
        return "optimized_dmd";
    }
    return "unknown";
}

Method method_from_string(std::string_view name)
{
    if (name == "standard_dmd" || name == "dmd") {
        return Method::standard_dmd;
    }
    if (name == "optimized_dmd" || name == "od") {
        return Method::optimized_dmd;
    }
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

SplitSet shift_splits(const SplitSet& splits, double shift_seconds)
{
    std::vector<double> lines = splits.lines();
    for (std::size_t k = 1; k + 1 < lines.size(); ++k) {
        lines[k] += shift_seconds;
    }
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (!(lines[k] > lines[k - 1])) {
            throw DomainError("shifting by " + std::to_string(shift_seconds) +
                              " breaks the order of split lines " + std::to_string(k - 1) +
                              " and " + std::to_string(k));
        }
    }
    return SplitSet(std::move(lines));
}

SplitSet snap_to_snapshots(const SnapshotMatrix& data, const SplitSet& splits)
{
    const double tol = 1e-6 * std::max(data.t_end() - data.t_begin(), 1e-300);
    if (std::abs(splits.front() - data.t_begin()) > tol ||
        std::abs(splits.back() - data.t_end()) > tol) {
        throw DomainError("split horizon [" + std::to_string(splits.front()) + ", " +
                          std::to_string(splits.back()) + "] does not match the data horizon [" +
                          std::to_string(data.t_begin()) + ", " +
                          std::to_string(data.t_end()) + "]");
    }
    std::vector<double> lines;
    Index previous = -1;
    for (const double t : splits.lines()) {
        const Index c = data.nearest_column(t);
        if (c <= previous) {
            throw DomainError("split line " + std::to_string(t) +
                              " collapses onto the previous line at snapshot resolution");
        }
        lines.push_back(data.t_grid(c));
        previous = c;
    }
    return SplitSet(std::move(lines));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct PieceFit {
    DmdModel model;
    double seconds = 0.0;
    std::string stop;
};

PieceFit fit_piece(const SnapshotMatrix& block, const SplitDmdOptions& options)
{
    PieceFit fit;
    const auto start = Clock::now();
    if (options.method == Method::standard_dmd) {
        fit.model = exact_dmd(block, options.rank);
        fit.seconds = seconds_since(start);
        fit.stop = "exact";
    } else {
        OptDmdResult od = optdmd(block, options.rank, std::nullopt, options.od);
        fit.seconds = seconds_since(start);
        fit.model = std::move(od.model);
        fit.stop = std::string(to_string(od.stop));
    }
    return fit;
}

std::string piece_context(std::size_t k, const SplitSet& splits)
{
    return "subinterval " + std::to_string(k) + " [" +
           std::to_string(splits[static_cast<Index>(k)]) + ", " +
           std::to_string(splits[static_cast<Index>(k) + 1]) + "]: ";
}

}  // namespace

SplitDmdResult split_dmd(const SnapshotMatrix& data, const SplitDmdOptions& options)
{
    data.validate();
    if (options.rank < 1) {
        throw ConfigError("rank must be positive");
    }
    if (options.workers < 1) {
        throw ConfigError("workers must be positive");
    }
    options.od.validate();

    SplitDmdResult result;
    SplitDmdModel& model = result.model;
    model.method = options.method;
    model.rank = options.rank;

    const auto seg_start = Clock::now();
    if (options.splits) {
        model.splits = snap_to_snapshots(data, *options.splits);
    } else {
        model.splits = robust_split(data, options.nsplit);
    }
    model.segmentation_time_seconds = options.splits ? 0.0 : seconds_since(seg_start);

    const auto num_pieces = static_cast<std::size_t>(model.splits.num_intervals());
    std::vector<std::pair<Index, Index>> blocks;
    for (std::size_t k = 0; k < num_pieces; ++k) {
        const Index first = data.nearest_column(model.splits[static_cast<Index>(k)]);
        const Index last = data.nearest_column(model.splits[static_cast<Index>(k) + 1]);
        if (last - first + 1 < options.rank + 1) {
            throw ConfigError(piece_context(k, model.splits) + "has " +
                              std::to_string(last - first + 1) +
                              " snapshot columns, rank " + std::to_string(options.rank) +
                              " needs at least " + std::to_string(options.rank + 1) +
                              "; raise delta or lower the rank");
        }
        blocks.emplace_back(first, last);
    }

    std::vector<PieceFit> fits(num_pieces);
    std::vector<std::exception_ptr> errors(num_pieces);
    auto work = [&](std::size_t k) {
        try {
            fits[k] = fit_piece(data.block(blocks[k].first, blocks[k].second), options);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(options.workers),
                                               num_pieces);
    if (workers <= 1) {
        for (std::size_t k = 0; k < num_pieces; ++k) {
            work(k);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < num_pieces; k = next++) {
                    work(k);
                }
            });
        }
        for (auto& thread : pool) {
            thread.join();
        }
    }

    for (std::size_t k = 0; k < num_pieces; ++k) {
        if (!errors[k]) {
            continue;
        }
        try {
            std::rethrow_exception(errors[k]);
        } catch (const RankError& e) {
            throw RankError(piece_context(k, model.splits) + e.what(), e.achievable_rank());
        } catch (const InitError& e) {
            throw InitError(piece_context(k, model.splits) + e.what());
        }
    }

    double fit_total = 0.0;
    for (auto& fit : fits) {
        fit_total += fit.seconds;
        model.piece_fit_seconds.push_back(fit.seconds);
        model.piece_stop_reasons.push_back(std::move(fit.stop));
        model.pieces.push_back(std::move(fit.model));
    }
    model.total_fit_time_seconds =
        fit_total + (options.include_segmentation_time ? model.segmentation_time_seconds : 0.0);

    result.report =
        error_report(data, reconstruct_split(model, data.t_grid), model.total_fit_time_seconds);
    return result;
}

Eigen::MatrixXd reconstruct_split(const SplitDmdModel& model, const Eigen::VectorXd& t_grid)
{
    if (model.pieces.size() != static_cast<std::size_t>(model.splits.num_intervals())) {
        throw ShapeError("split model has " + std::to_string(model.pieces.size()) +
                         " pieces for " + std::to_string(model.splits.num_intervals()) +
                         " subintervals");
    }
    const Index rows = model.pieces.empty() ? 0 : model.pieces.front().modes.rows();
    Eigen::MatrixXd out(rows, t_grid.size());
    Index k = 0;
    while (k < t_grid.size()) {
        const Index piece = model.splits.owner(t_grid(k));
        Index stop = k + 1;
        while (stop < t_grid.size() && model.splits.owner(t_grid(stop)) == piece) {
            ++stop;
        }
        out.middleCols(k, stop - k) =
            reconstruct(model.pieces[static_cast<std::size_t>(piece)], t_grid.segment(k, stop - k))
                .real();
        k = stop;
    }
    return out;
}

}  // namespace splitdmd
