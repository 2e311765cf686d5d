#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbspec {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RateFamily { linear };

/// Parameters of the linear family: F = λσ, K_B = bσ, K_P = pσ,
/// K_D = μ_D(1−σ), K_Q = μ_Q(1−σ).
struct LinearRates {
  double lambda = 1.0;
  double b = 1.0;
  double p = 1.0;
  double mu_D = 0.5;
  double mu_Q = 0.5;
};

struct Partials {
  double f_s, f_p, g_s, g_p;
};

struct SecondPartials {
  double f_ss, f_sp, f_pp, g_ss, g_sp, g_pp;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> failures;
  double max_partial_rel_error = 0.0;
};

class RateModel {
public:
  RateModel() : RateModel(LinearRates{}) {}

  explicit RateModel(const LinearRates& r, bool enforce = true) : lin_(r) {
    if(enforce && !(r.b > r.mu_D)) {
      throw InputError("rate model: b must exceed mu_D");
    }
    if(enforce && (r.lambda <= 0 || r.b <= 0 || r.p <= 0 || r.mu_D <= 0 || r.mu_Q <= 0)) {
      throw InputError("rate model: all rate parameters must be positive");
    }
  }

  // Construction without the admissibility checks, for validator tests
  // and degenerate smoke tests.
  static RateModel unchecked(const LinearRates& r) { return RateModel(r, false); }

  RateFamily family() const { return RateFamily::linear; }
  const LinearRates& params() const { return lin_; }

  double F(double s) const { return lin_.lambda * s; }
  double dF(double) const { return lin_.lambda; }
  double d2F(double) const { return 0.0; }

  double KB(double s) const { return lin_.b * s; }
  double dKB(double) const { return lin_.b; }
  double KD(double s) const { return lin_.mu_D * (1.0 - s); }
  double dKD(double) const { return -lin_.mu_D; }
  double KP(double s) const { return lin_.p * s; }
  double dKP(double) const { return lin_.p; }
  double KQ(double s) const { return lin_.mu_Q * (1.0 - s); }
  double dKQ(double) const { return -lin_.mu_Q; }

  double KM(double s) const { return KB(s) + KD(s); }
  double dKM(double s) const { return dKB(s) + dKD(s); }
  double KN(double s) const { return KP(s) + KQ(s); }
  double dKN(double s) const { return dKP(s) + dKQ(s); }

  // Exact increments K(s0+ds) − K(s0); the family is affine in σ.
  double dF_inc(double, double ds) const { return lin_.lambda * ds; }
  double KM_inc(double s0, double ds) const { return dKM(s0) * ds; }
  double KN_inc(double s0, double ds) const { return dKN(s0) * ds; }
  double KP_inc(double s0, double ds) const { return dKP(s0) * ds; }
  double KD_inc(double s0, double ds) const { return dKD(s0) * ds; }

  // Unchecked evaluations used inside integrators.
  double f(double s, double p) const {
    return KP(s) + (KM(s) - KN(s)) * p - KM(s) * p * p;
  }
  double g(double s, double p) const { return KM(s) * p - KD(s); }

  Partials partials(double s, double p) const {
    return {dKP(s) + (dKM(s) - dKN(s)) * p - dKM(s) * p * p,
            KM(s) - KN(s) - 2.0 * KM(s) * p,
            dKM(s) * p - dKD(s),
            KM(s)};
  }

  SecondPartials second_partials(double s, double p) const {
    double dm = dKM(s);
    return {0.0, dm - dKN(s) - 2.0 * dm * p, -2.0 * KM(s), 0.0, dm, 0.0};
  }

  // f(s0+ds, p0+dp) − f(s0, p0) without cancellation.
  double f_increment(double s0, double p0, double ds, double dp) const {
    double dKP_ = KP_inc(s0, ds), dKM_ = KM_inc(s0, ds), dKN_ = KN_inc(s0, ds);
    double km1 = KM(s0) + dKM_, kn1 = KN(s0) + dKN_;
    return dKP_ + (dKM_ - dKN_) * p0 + (km1 - kn1) * dp
           - dKM_ * p0 * p0 - km1 * (2.0 * p0 * dp + dp * dp);
  }

  double g_increment(double s0, double p0, double ds, double dp) const {
    double dKM_ = KM_inc(s0, ds);
    return dKM_ * p0 + (KM(s0) + dKM_) * dp - KD_inc(s0, ds);
  }

  // Unique root in (0,1) of the quadratic f(s, ·).
  double center_density(double s) const {
    double a = KM(s), bq = KM(s) - KN(s), c = KP(s);
    double disc = std::sqrt(bq * bq + 4.0 * a * c);
    return bq > 0 ? (bq + disc) / (2.0 * a) : 2.0 * c / (disc - bq);
  }

  double eval_f(double s, double p) const { check(s, p); return f(s, p); }
  double eval_g(double s, double p) const { check(s, p); return g(s, p); }
  Partials eval_partials(double s, double p) const { check(s, p); return partials(s, p); }

private:
  static void check(double s, double p) {
    if(!(s >= 0.0 && s <= 1.0) || !(p >= 0.0 && p <= 1.0)) {
      throw InputError("rate model: (sigma, p) outside [0,1]^2");
    }
  }

  LinearRates lin_;
};

inline ValidationReport validate_model(const RateModel& m, int sample_count) {
  if(sample_count < 2) throw InputError("validate_model: sample_count must be >= 2");
  ValidationReport rep;
  auto fail = [&](const std::string& what, double s) {
    rep.ok = false;
    rep.failures.push_back(what + " at sigma=" + std::to_string(s));
  };
  const double h = 1e-5;
  for(int i = 0; i < sample_count; ++i) {
    double s = double(i) / (sample_count - 1);
    if(s == 0.0 && m.F(0.0) != 0.0) fail("F(0) != 0", s);
    if(!(m.dF(s) > 0)) fail("F' not positive", s);
    if(!(m.dKB(s) > 0)) fail("K_B' not positive", s);
    if(!(m.dKD(s) < 0)) fail("K_D' not negative", s);
    if(!(m.dKP(s) > 0)) fail("K_P' not positive", s);
    if(!(m.dKQ(s) < 0)) fail("K_Q' not negative", s);
    if(!(m.dKB(s) + m.dKD(s) > 0)) fail("K_B' + K_D' not positive", s);
    if(s > 0 && s < 1) {
      if(!(m.f(s, 0.0) > 0)) fail("f(sigma,0) not positive", s);
      if(!(m.f(s, 1.0) < 0)) fail("f(sigma,1) not negative", s);
    }
    // Centered differences against the analytic partials.
    double sc = std::min(std::max(s, h), 1.0 - h);
    for(double p : {0.1, 0.5, 0.9}) {
      Partials a = m.partials(sc, p);
      double fs = (m.f(sc + h, p) - m.f(sc - h, p)) / (2 * h);
      double fp = (m.f(sc, p + h) - m.f(sc, p - h)) / (2 * h);
      double gs = (m.g(sc + h, p) - m.g(sc - h, p)) / (2 * h);
      double gp = (m.g(sc, p + h) - m.g(sc, p - h)) / (2 * h);
      auto rel = [](double x, double y) {
        return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-12});
      };
      double e = std::max({rel(a.f_s, fs), rel(a.f_p, fp), rel(a.g_s, gs), rel(a.g_p, gp)});
      rep.max_partial_rel_error = std::max(rep.max_partial_rel_error, e);
    }
  }
  if(m.KB(0.0) != 0.0) fail("K_B(0) != 0", 0.0);
  if(m.KP(0.0) != 0.0) fail("K_P(0) != 0", 0.0);
  if(m.KD(1.0) != 0.0) fail("K_D(1) != 0", 1.0);
  if(m.KQ(1.0) != 0.0) fail("K_Q(1) != 0", 1.0);
  if(rep.max_partial_rel_error > 1e-6) {
    rep.ok = false;
    rep.failures.push_back("analytic partials disagree with finite differences");
  }
  return rep;
}

}  // namespace fbspec
