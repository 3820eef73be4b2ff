#include "lidx/attack.hpp"

#include <cmath>

namespace lidx {

namespace {

struct Summary {
    double mean = 0, sd = 0, height = 0;
};

Summary summarize(std::span<const ProbeStats> xs) {
    Summary s;
    if (xs.empty()) return s;
    for (const auto &x : xs) {
        s.mean += x.mean_ops;
        s.height += static_cast<double>(x.height);
    }
    s.mean /= static_cast<double>(xs.size());
    s.height /= static_cast<double>(xs.size());
    for (const auto &x : xs) s.sd += (x.mean_ops - s.mean) * (x.mean_ops - s.mean);
    s.sd = xs.size() > 1 ? std::sqrt(s.sd / static_cast<double>(xs.size() - 1)) : 0;
    return s;
}

} // namespace

Calibration calibrate(std::span<const ProbeStats> a, std::span<const ProbeStats> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::InsufficientData, "calibration needs instances of both labels");
    const Summary sa = summarize(a), sb = summarize(b);
    if (sa.mean == sb.mean) throw Error(ErrorCode::AmbiguousCalibration, "calibrated means are equal");
    Calibration c;
    c.mean_a = sa.mean;
    c.sd_a = sa.sd;
    c.mean_b = sb.mean;
    c.sd_b = sb.sd;
    c.height_a = sa.height;
    c.height_b = sb.height;
    c.threshold = (sa.mean + sb.mean) / 2;
    return c;
}

Label pgm_classify(const ProbeStats &stats, const Calibration &cal) {
    if (cal.mean_a == cal.mean_b) throw Error(ErrorCode::AmbiguousCalibration, "calibrated means are equal");
    if (stats.mean_ops != cal.threshold) {
        const bool above = stats.mean_ops > cal.threshold;
        return above == (cal.mean_a > cal.mean_b) ? Label::A : Label::B;
    }
    const double h = static_cast<double>(stats.height);
    return std::abs(h - cal.height_b) < std::abs(h - cal.height_a) ? Label::B : Label::A;
}

} // namespace lidx
