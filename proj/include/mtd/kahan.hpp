#pragma once
// Kahan compensated summation. Used for every moment accumulator so that
// results at N ~ 1e8+ samples stay reproducible to ~1e-12 relative error
// regardless of how the stream is segmented or combined.

namespace mtd {

struct kahan {
    double s = 0.0;  // running sum
    double c = 0.0;  // compensation

    void add(double v) {
        double y = v - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    // Merge another compensated sum into this one, carrying its compensation.
    void merge(const kahan& o) {
        add(o.s);
        add(-o.c);
    }
    double value() const { return s; }
};

}  // namespace mtd
