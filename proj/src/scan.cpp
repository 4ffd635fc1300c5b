#include "epismc/scan.hpp"

#include <algorithm>
#include <barrier>
#include <bit>
#include <stdexcept>
#include <thread>

namespace epismc {
namespace {

// In-place Blelloch sweeps over a zero-padded power-of-two buffer.
//
// Guards keep the sweeps work-efficient on padded inputs: combines whose
// right half covers only padding degrade to copies, all-padding subtrees are
// skipped outright, and the empty prefix travelling down the leftmost spine
// is assigned rather than added. Copies are bit-equal to the adds they
// replace for the nonnegative inputs this is used on, so the serial and
// threaded paths stay interchangeable.
template <bool Count>
class Sweep {
public:
    explicit Sweep(std::span<const double> values)
        : n_(values.size()), m_(std::bit_ceil(values.size())), a_(m_, 0.0) {
        std::copy(values.begin(), values.end(), a_.begin());
    }

    std::size_t padded() const { return m_; }
    std::size_t adds() const { return adds_; }

    void up_level(std::size_t h, std::size_t op_lo, std::size_t op_hi) {
        for (std::size_t op = op_lo; op < op_hi; ++op) {
            const std::size_t i = op * 2 * h;
            if (i >= n_) break;
            const std::size_t l = i + h - 1;
            const std::size_t r = i + 2 * h - 1;
            if (i + h >= n_) {
                a_[r] = a_[l];
                continue;
            }
            a_[r] += a_[l];
            if constexpr (Count) ++adds_;
        }
    }

    // a_[r] holds the prefix of the segment [i, i+2h) on entry.
    void down_level(std::size_t h, std::size_t op_lo, std::size_t op_hi) {
        for (std::size_t op = op_lo; op < op_hi; ++op) {
            const std::size_t i = op * 2 * h;
            if (i > n_) break;
            const std::size_t l = i + h - 1;
            const std::size_t r = i + 2 * h - 1;
            const double left_total = a_[l];
            a_[l] = a_[r];
            if (i == 0) {
                a_[r] = left_total;  // empty prefix
                continue;
            }
            if (i >= n_) continue;  // left half covers padding only
            a_[r] += left_total;
            if constexpr (Count) ++adds_;
        }
    }

    void pivot() {
        total_ = a_[m_ - 1];
        a_[m_ - 1] = 0.0;
    }

    std::vector<double> take_inclusive() const {
        std::vector<double> out(n_);
        for (std::size_t k = 0; k < n_; ++k)
            out[k] = (k + 1 < m_) ? a_[k + 1] : total_;
        return out;
    }

    std::vector<double> take_exclusive() const {
        return std::vector<double>(a_.begin(), a_.begin() + n_);
    }

private:
    std::size_t n_;
    std::size_t m_;
    std::vector<double> a_;
    double total_ = 0.0;
    std::size_t adds_ = 0;
};

template <bool Count>
void run_serial(Sweep<Count>& s) {
    const std::size_t m = s.padded();
    for (std::size_t h = 1; h < m; h <<= 1) s.up_level(h, 0, m / (2 * h));
    s.pivot();
    for (std::size_t h = m >> 1; h >= 1; h >>= 1) s.down_level(h, 0, m / (2 * h));
}

void run_threaded(Sweep<false>& s, int workers) {
    const std::size_t m = s.padded();
    const std::size_t n_workers = std::min<std::size_t>(
        std::max(workers, 1), std::max<std::size_t>(m / 2, 1));
    if (n_workers <= 1) {
        run_serial(s);
        return;
    }

    std::barrier sync(static_cast<std::ptrdiff_t>(n_workers));
    auto slice = [n_workers](std::size_t w, std::size_t ops, std::size_t& lo,
                             std::size_t& hi) {
        const std::size_t base = ops / n_workers;
        const std::size_t extra = ops % n_workers;
        lo = w * base + std::min(w, extra);
        hi = lo + base + (w < extra ? 1 : 0);
    };
    auto body = [&](std::size_t w) {
        std::size_t lo = 0;
        std::size_t hi = 0;
        for (std::size_t h = 1; h < m; h <<= 1) {
            slice(w, m / (2 * h), lo, hi);
            s.up_level(h, lo, hi);
            sync.arrive_and_wait();
        }
        if (w == 0) s.pivot();
        sync.arrive_and_wait();
        for (std::size_t h = m >> 1; h >= 1; h >>= 1) {
            slice(w, m / (2 * h), lo, hi);
            s.down_level(h, lo, hi);
            sync.arrive_and_wait();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(n_workers - 1);
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(body, w);
    body(0);
    for (auto& t : pool) t.join();
}

Sweep<false> sweep_for(std::span<const double> values, int workers) {
    if (values.empty())
        throw std::invalid_argument("scan: input must not be empty");
    Sweep<false> s(values);
    if (workers > 1)
        run_threaded(s, workers);
    else
        run_serial(s);
    return s;
}

}  // namespace

std::vector<double> inclusive_scan(std::span<const double> values, int workers) {
    return sweep_for(values, workers).take_inclusive();
}

std::vector<double> exclusive_scan(std::span<const double> values, int workers) {
    return sweep_for(values, workers).take_exclusive();
}

std::size_t scan_add_count(std::span<const double> values) {
    if (values.empty())
        throw std::invalid_argument("scan: input must not be empty");
    Sweep<true> s(values);
    run_serial(s);
    return s.adds();
}

}  // namespace epismc
