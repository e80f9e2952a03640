#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "excusum/models.hpp"
#include "excusum/rng.hpp"

namespace excusum {

/// Change point nu: a finite time >= 1, or Never (no change; false-alarm regime).
class ChangePoint {
public:
    enum class Kind { At, Never };

    static ChangePoint at(std::uint64_t nu) {
        if (nu < 1) throw std::invalid_argument("change point must be >= 1");
        return ChangePoint(Kind::At, nu);
    }
    static ChangePoint never() noexcept { return ChangePoint(Kind::Never, 0); }

    Kind kind() const noexcept { return kind_; }
    bool is_never() const noexcept { return kind_ == Kind::Never; }

    std::uint64_t time() const {
        if (is_never()) throw std::logic_error("change point is infinite");
        return nu_;
    }

    /// Observation n (1-based) comes from g.
    bool before_change(std::uint64_t n) const noexcept { return is_never() || n < nu_; }

    std::string to_string() const { return is_never() ? "inf" : std::to_string(nu_); }

    friend bool operator==(const ChangePoint&, const ChangePoint&) = default;

private:
    ChangePoint(Kind kind, std::uint64_t nu) : kind_(kind), nu_(nu) {}

    Kind kind_;
    std::uint64_t nu_;
};

struct ChangeSpec {
    ChangePoint nu = ChangePoint::never();
    std::uint64_t horizon = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    }
};

struct Path {
    std::vector<double> samples;
    ChangeSpec spec;
};

/// Draws X_1, X_2, ... one at a time: X_n ~ g for n < nu and X_n ~ f_{n - nu}
/// for n >= nu, so the observation at time nu is drawn from f_0. The stream is
/// unbounded; ChangeSpec::horizon is only used by generate_path.
template <DensityFamily M>
class PathStream {
public:
    PathStream(const M& model, ChangeSpec spec) : model_(&model), spec_(spec), rng_(spec.seed) {
        spec_.validate();
    }

    double next() {
        ++n_;
        if (spec_.nu.before_change(n_)) return model_->sample_pre(rng_);
        return model_->sample_post(static_cast<std::size_t>(n_ - spec_.nu.time()), rng_);
    }

    /// Time index of the most recent observation (0 before the first draw).
    std::uint64_t time() const noexcept { return n_; }

    const ChangeSpec& spec() const noexcept { return spec_; }

private:
    const M* model_;
    ChangeSpec spec_;
    Rng rng_;
    std::uint64_t n_ = 0;
};

template <DensityFamily M>
Path generate_path(const M& model, const ChangeSpec& spec) {
    PathStream<M> stream(model, spec);
    Path path{{}, spec};
    path.samples.reserve(spec.horizon);
    for (std::uint64_t n = 0; n < spec.horizon; ++n) path.samples.push_back(stream.next());
    return path;
}

}  // namespace excusum
