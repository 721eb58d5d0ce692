#include "avi/snr_empirical.hpp"

namespace avi {

PathSnrTable snr_along_path(const std::vector<std::pair<int, DiagonalGaussian>>& path,
                            const TargetContract& target, const std::vector<AlphaParam>& alphas,
                            std::int64_t n, const RngStream& rng) {
    if (path.empty()) throw std::invalid_argument("snr_along_path: empty path");
    PathSnrTable table;
    std::uint64_t cell_id = 0;
    for (const auto& [step, q] : path) {
        for (const AlphaParam alpha : alphas) {
            PathSnrCell cell;
            cell.step = step;
            cell.alpha = alpha.value;
            const auto sampler = make_sampler(EstimatorKind::Drep, target, q, alpha);
            try {
                const McSnrEstimate est = mc_snr(sampler, n, rng.split(cell_id));
                cell.snr = est.snr;
                cell.nonfinite_count = est.nonfinite_count;
            } catch (const DegenerateAllZero&) {
                cell.status = PathCellStatus::DegenerateZero;
            } catch (const NonFiniteError&) {
                cell.status = PathCellStatus::AllNonFinite;
            }
            table.cells.push_back(cell);
            ++cell_id;
        }
    }
    return table;
}

const char* to_string(PathCellStatus s) {
    switch (s) {
        case PathCellStatus::Ok: return "ok";
        case PathCellStatus::DegenerateZero: return "degenerate-zero";
        case PathCellStatus::AllNonFinite: return "all-nonfinite";
    }
    return "unknown";
}

}  // namespace avi
