//! Exact binomial and Poisson tails, and checks of the closed-form
//! inequalities built on them.
//!
//! Tails are summed in log space from their largest term with compensated
//! summation, so values far below `f64::MIN_POSITIVE` still compare
//! correctly. Comparisons use a relative slack of `1e-12`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::check_probability;
use crate::sum::Compensated;
use crate::{Error, Result};

/// Relative slack allowed when comparing an exact value with its bound.
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

const NEGLIGIBLE: f64 = 1e-20;

/// `ln C(n, k)`, `-∞` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut s = Compensated::default();
    for i in 1..=k {
        s.add(libm::log((n - k + i) as f64 / i as f64));
    }
    s.value()
}

/// `ln k!`.
pub fn ln_factorial(k: u64) -> f64 {
    let mut s = Compensated::default();
    for i in 2..=k {
        s.add(libm::log(i as f64));
    }
    s.value()
}

/// Sum of a run of positive terms starting at 1 and shrinking by `ratio(i)`
/// each step, stopping once they no longer matter.
fn geometric_like_sum(mut ratio: impl FnMut(u64) -> Option<f64>) -> f64 {
    let mut s = Compensated::default();
    let mut t = 1.0;
    let mut i = 0;
    loop {
        s.add(t);
        match ratio(i) {
            Some(r) => t *= r,
            None => break,
        }
        i += 1;
        if t < NEGLIGIBLE * s.value() || t == 0.0 {
            break;
        }
    }
    s.value()
}

fn ln_binomial_pmf(n: u64, ln_p: f64, ln_q: f64, i: u64) -> f64 {
    ln_choose(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q
}

/// `ln P(Bin(n, p) ≥ m)`.
pub fn binomial_tail_ln(n: u64, p: f64, m: u64) -> Result<f64> {
    check_probability(p)?;
    if m == 0 {
        return Ok(0.0);
    }
    if m > n || p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let ln_p = libm::log(p);
    let ln_q = libm::log1p(-p);
    let odds = p / q;
    if m as f64 > n as f64 * p {
        // Terms decrease from i = m upwards.
        let anchor = ln_binomial_pmf(n, ln_p, ln_q, m);
        let s = geometric_like_sum(|j| {
            let i = m + j;
            (i < n).then(|| (n - i) as f64 / (i + 1) as f64 * odds)
        });
        Ok(anchor + libm::log(s))
    } else {
        // Complement: terms decrease from i = m - 1 downwards.
        let top = m - 1;
        let anchor = ln_binomial_pmf(n, ln_p, ln_q, top);
        let s = geometric_like_sum(|j| {
            let i = top - j.min(top);
            (j < top).then(|| i as f64 / (n - i + 1) as f64 / odds)
        });
        let lower = libm::exp(anchor + libm::log(s));
        Ok(libm::log1p(-lower.min(1.0)))
    }
}

/// `P(Bin(n, p) ≥ m)`.
pub fn binomial_tail(n: u64, p: f64, m: u64) -> Result<f64> {
    if m > n {
        return Err(Error::InvalidParameter(alloc::format!("tail index {m} exceeds n = {n}")));
    }
    Ok(libm::exp(binomial_tail_ln(n, p, m)?))
}

/// `P(Bin(n, p) < m)`, summed directly (no complement).
pub fn binomial_lower(n: u64, p: f64, m: u64) -> Result<f64> {
    check_probability(p)?;
    let mut s = Compensated::default();
    for i in 0..m.min(n + 1) {
        let t = if p == 0.0 {
            (i == 0) as u8 as f64
        } else if p == 1.0 {
            (i == n) as u8 as f64
        } else {
            libm::exp(ln_binomial_pmf(n, libm::log(p), libm::log1p(-p), i))
        };
        s.add(t);
    }
    Ok(s.value())
}

/// `ln P(Poisson(t) ≥ r)`, the probability that `r` rings of a rate-one
/// clock happen by time `t`.
pub fn erlang_tail_ln(r: u64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("time {t} must be finite and >= 0")));
    }
    if r == 0 {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_t = libm::log(t);
    let ln_term = |k: u64| -t + k as f64 * ln_t - ln_factorial(k);
    if r as f64 > t {
        let anchor = ln_term(r);
        let s = geometric_like_sum(|j| Some(t / (r + j + 1) as f64));
        Ok(anchor + libm::log(s))
    } else {
        let top = r - 1;
        let anchor = ln_term(top);
        let s = geometric_like_sum(|j| (j < top).then(|| (top - j) as f64 / t));
        let lower = libm::exp(anchor + libm::log(s));
        Ok(libm::log1p(-lower.min(1.0)))
    }
}

/// `P(r, T)`: chance that a fixed path of `r` sites can be realised by
/// increasing rings within `[0, T]`.
pub fn erlang_tail(r: u64, t: f64) -> Result<f64> {
    Ok(libm::exp(erlang_tail_ln(r, t)?))
}

/// Regularised lower incomplete gamma `P(a, x)`, used as an independent
/// route to [`erlang_tail`] (the Erlang CDF).
pub fn gamma_cdf(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_front = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if libm::fabs(del) < libm::fabs(sum) * 1e-17 {
                break;
            }
        }
        sum * libm::exp(ln_front)
    } else {
        // Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if libm::fabs(d) < tiny {
                d = tiny;
            }
            c = b + an / c;
            if libm::fabs(c) < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if libm::fabs(delta - 1.0) < 1e-17 {
                break;
            }
        }
        1.0 - libm::exp(ln_front) * h
    }
}

/// An exact value set against a closed-form upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub exact: f64,
    pub bound: f64,
    pub ln_exact: f64,
    pub ln_bound: f64,
    /// Intermediate values of the inequality chain, in log space, when the
    /// bound is proved through one.
    pub chain: Vec<(&'static str, f64)>,
    pub in_domain: bool,
    pub holds: bool,
}

impl BoundCheck {
    fn new(name: &'static str, params: Vec<(&'static str, f64)>, ln_exact: f64, ln_bound: f64, in_domain: bool) -> Self {
        BoundCheck {
            name,
            params,
            exact: libm::exp(ln_exact),
            bound: libm::exp(ln_bound),
            ln_exact,
            ln_bound,
            chain: Vec::new(),
            in_domain,
            holds: ln_le(ln_exact, ln_bound),
        }
    }

    /// Every link of the chain is no larger than the next.
    pub fn chain_holds(&self) -> bool {
        self.chain.windows(2).all(|w| ln_le(w[0].1, w[1].1))
    }
}

#[inline]
fn ln_le(a: f64, b: f64) -> bool {
    a == f64::NEG_INFINITY || a <= b + RELATIVE_TOLERANCE
}

/// `P(Bin(2d, 1/2 − ε) ≥ d) ≤ exp(−2ε²d)`.
pub fn chernoff_check(d: u64, eps: f64) -> Result<BoundCheck> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(alloc::format!("eps {eps} must lie in (0, 1/2)")));
    }
    let exact = binomial_tail_ln(2 * d, 0.5 - eps, d)?;
    Ok(BoundCheck::new("chernoff", vec![("d", d as f64), ("eps", eps)], exact, -2.0 * eps * eps * d as f64, true))
}

/// `P(Bin(n, p) ≥ m) ≤ 2p^{m/2}` for `pn² ≤ 1`, with the chain
/// `≤ Σ_{i≥m} C(n,i)p^i ≤ 2(pn)^m ≤ 2p^{m/2}` recorded link by link.
pub fn nunlikely_bound_check(n: u64, p: f64, m: u64) -> Result<BoundCheck> {
    check_probability(p)?;
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(alloc::format!("m = {m} must lie in 1..={n}")));
    }
    let in_domain = p * (n as f64) * (n as f64) <= 1.0;
    let exact = binomial_tail_ln(n, p, m)?;
    let ln2 = core::f64::consts::LN_2;
    let ln_p = libm::log(p);
    let bound = ln2 + 0.5 * m as f64 * ln_p;
    let mut check = BoundCheck::new("nunlikely", vec![("n", n as f64), ("p", p), ("m", m as f64)], exact, bound, in_domain);
    let unweighted = if p == 0.0 {
        f64::NEG_INFINITY
    } else {
        let mut s = Compensated::default();
        let lead = ln_choose(n, m) + m as f64 * ln_p;
        for i in m..=n {
            s.add(libm::exp(ln_choose(n, i) + i as f64 * ln_p - lead));
        }
        lead + libm::log(s.value())
    };
    let geometric = ln2 + m as f64 * libm::log(p * n as f64);
    check.chain = vec![("exact", exact), ("sum_choose", unweighted), ("two_pn_m", geometric), ("bound", bound)];
    Ok(check)
}

/// `P(r, T) ≤ (8T/r)^{r/2}` for even `r ≥ 2`.
pub fn path_bound_check(r: u64, t: f64) -> Result<BoundCheck> {
    if r < 2 || r % 2 != 0 {
        return Err(Error::InvalidParameter(alloc::format!("path length r = {r} must be even and >= 2")));
    }
    let exact = erlang_tail_ln(r, t)?;
    let bound = if t == 0.0 { f64::NEG_INFINITY } else { 0.5 * r as f64 * libm::log(8.0 * t / r as f64) };
    let mut check = BoundCheck::new("path", vec![("r", r as f64), ("T", t)], exact, bound, true);
    if t > 0.0 {
        let half = r / 2;
        let mid = ln_choose(r, half) + half as f64 * libm::log(2.0 * t / r as f64);
        check.chain = vec![("exact", exact), ("choose_half", mid), ("bound", bound)];
    }
    Ok(check)
}

/// Exact Erlang tails against their closed forms for `r = 1, 2`.
pub fn erlang_closed_form_check(r: u64, t: f64) -> Result<BoundCheck> {
    let closed = match r {
        1 => -libm::expm1(-t),
        2 => 1.0 - (1.0 + t) * libm::exp(-t),
        _ => return Err(Error::InvalidParameter("closed forms exist here for r = 1, 2 only".into())),
    };
    let exact = erlang_tail(r, t)?;
    let rel = if closed == 0.0 { libm::fabs(exact) } else { libm::fabs(exact - closed) / closed };
    let mut c = BoundCheck::new("erlang_closed_form", vec![("r", r as f64), ("T", t)], libm::log(exact), libm::log(closed), true);
    c.holds = rel <= RELATIVE_TOLERANCE;
    Ok(c)
}

/// `exp(−ε^{k+2} d^{k+1} / (8^{2k+1} (k+1)!))`, the per-vertex bound on
/// joining the staged process at step `k + 1`. Natural log returned.
pub fn staged_step_bound_ln(eps: f64, d: f64, k: u64) -> f64 {
    let k1 = (k + 1) as f64;
    let ln_num = (k as f64 + 2.0) * libm::log(eps) + k1 * libm::log(d);
    let ln_den = (2 * k + 1) as f64 * libm::log(8.0) + ln_factorial(k + 1);
    -libm::exp(ln_num - ln_den)
}

/// Sum of labelled probabilities, capped at one.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionBound {
    pub components: Vec<(alloc::string::String, f64)>,
    pub raw_total: f64,
    pub total: f64,
    pub capped: bool,
}

pub fn union_bound_report<S: Into<alloc::string::String>>(components: impl IntoIterator<Item = (S, f64)>) -> UnionBound {
    let components: Vec<(alloc::string::String, f64)> = components.into_iter().map(|(l, p)| (l.into(), p)).collect();
    let mut s = Compensated::default();
    for (_, p) in &components {
        s.add(*p);
    }
    let raw_total = s.value();
    UnionBound { capped: raw_total > 1.0, total: raw_total.min(1.0), raw_total, components }
}

/// `Σ_{r ≥ r_min} (2n)^d (2d)^r P(r, T)`, summed until the terms stop
/// mattering. Natural log returned.
pub fn clock_path_union_bound_ln(n: u64, d: u64, t: f64, r_min: u64) -> Result<f64> {
    let ln_front = d as f64 * libm::log(2.0 * n as f64);
    let ln_branch = libm::log(2.0 * d as f64);
    let mut terms: Vec<f64> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut r = r_min.max(1);
    loop {
        let lt = ln_front + r as f64 * ln_branch + erlang_tail_ln(r, t)?;
        terms.push(lt);
        best = best.max(lt);
        // Terms eventually fall like (2dT)^r / r!.
        if r as f64 > 2.0 * d as f64 * t + 2.0 && lt < best + libm::log(NEGLIGIBLE) {
            break;
        }
        if lt == f64::NEG_INFINITY || r > r_min + 100_000 {
            break;
        }
        r += 1;
    }
    if best == f64::NEG_INFINITY {
        return Ok(best);
    }
    let mut s = Compensated::default();
    for lt in terms {
        s.add(libm::exp(lt - best));
    }
    Ok(best + libm::log(s.value()))
}

/// The default grid: every check here must hold.
pub fn verification_grid() -> Vec<BoundCheck> {
    let mut out = Vec::new();
    for n in 2u64..=30 {
        let top = 1.0 / (n * n) as f64;
        let steps = 24;
        let lo = libm::log(1e-4f64);
        let hi = libm::log(top);
        for s in 0..=steps {
            let p = if s == steps { top } else { libm::exp(lo + (hi - lo) * s as f64 / steps as f64) };
            if p > top {
                continue;
            }
            for m in 1..=n {
                out.push(nunlikely_bound_check(n, p, m).expect("grid parameters are valid"));
            }
        }
        for m in 1..=n {
            out.push(nunlikely_bound_check(n, 0.0, m).expect("grid parameters are valid"));
        }
    }
    for d in 5u64..=2000 {
        for eps in [0.05, 0.1, 0.2, 0.3] {
            out.push(chernoff_check(d, eps).expect("grid parameters are valid"));
        }
    }
    for r in (2u64..=128).step_by(2) {
        let top = r as f64 / 8.0;
        for f in [1e-6, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0] {
            out.push(path_bound_check(r, top * f).expect("grid parameters are valid"));
        }
    }
    for t in [1e-8, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0] {
        out.push(erlang_closed_form_check(1, t).expect("r = 1"));
        // 1 − (1 + T)e^{−T} cancels badly for small T.
        if t >= 0.1 {
            out.push(erlang_closed_form_check(2, t).expect("r = 2"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial_tail(10, 0.3, 0).unwrap(), 1.0);
        assert!(close(binomial_tail(2, 0.5, 2).unwrap(), 0.25, 1e-15));
        assert!(binomial_tail(3, 0.5, 4).is_err());
        assert!(binomial_tail(3, 1.5, 1).is_err());
        assert_eq!(binomial_tail(5, 0.0, 1).unwrap(), 0.0);
        assert_eq!(binomial_tail(5, 1.0, 5).unwrap(), 1.0);
    }

    #[test]
    fn binomial_complement_sums_to_one() {
        for n in [1u64, 2, 7, 20, 63, 200, 1000] {
            for p in [0.001, 0.2, 0.5, 0.77, 0.999] {
                for m in 0..=n {
                    let total = binomial_tail(n, p, m).unwrap() + binomial_lower(n, p, m).unwrap();
                    assert!((total - 1.0).abs() < 1e-12, "n={n} p={p} m={m} total={total}");
                }
            }
        }
    }

    #[test]
    fn twenty_trials_against_chernoff() {
        let exact = binomial_tail(20, 0.3, 10).unwrap();
        assert!(exact <= libm::exp(-2.0 * 0.2 * 0.2 * 10.0));
        let c = chernoff_check(10, 0.2).unwrap();
        assert!(c.holds);
        assert!(close(c.exact, exact, 1e-13));
    }

    #[test]
    fn small_nunlikely_case() {
        let c = nunlikely_bound_check(5, 0.01, 2).unwrap();
        let expect = 1.0 - 0.99f64.powi(5) - 5.0 * 0.01 * 0.99f64.powi(4);
        assert!(close(c.exact, expect, 1e-12), "{} {}", c.exact, expect);
        assert!(close(c.bound, 0.02, 1e-15));
        assert!(c.in_domain && c.holds && c.chain_holds());
        let z = nunlikely_bound_check(4, 0.0, 2).unwrap();
        assert!(z.holds && z.exact == 0.0);
        assert!(!nunlikely_bound_check(5, 0.5, 2).unwrap().in_domain);
    }

    #[test]
    fn erlang_closed_forms() {
        assert_eq!(erlang_tail(3, 0.0).unwrap(), 0.0);
        assert_eq!(erlang_tail(0, 4.0).unwrap(), 1.0);
        for t in [0.01, 0.5, 1.0, 3.0, 9.0] {
            assert!(close(erlang_tail(1, t).unwrap(), -libm::expm1(-t), 1e-13));
        }
        let v = erlang_tail(2, 2.0).unwrap();
        assert!(close(v, 1.0 - 3.0 * libm::exp(-2.0), 1e-13));
        assert!((v - 0.5940).abs() < 1e-4);
    }

    #[test]
    fn erlang_matches_gamma_cdf() {
        for r in [1u64, 2, 3, 5, 8, 16, 40, 128] {
            for t in [0.05, 0.5, 1.0, 4.0, 16.0, 60.0, 200.0] {
                let a = erlang_tail(r, t).unwrap();
                let b = gamma_cdf(r as f64, t);
                assert!((a - b).abs() <= 1e-11 * a.max(1e-300) || (a - b).abs() < 1e-300, "r={r} t={t} {a} {b}");
            }
        }
    }

    #[test]
    fn path_bound_examples() {
        let c = path_bound_check(2, 2.0).unwrap();
        assert!(c.holds && close(c.bound, 8.0, 1e-14));
        let c = path_bound_check(16, 1.0).unwrap();
        assert!(c.holds && close(c.bound, 0.5f64.powi(8), 1e-14));
        let c = path_bound_check(10, 0.0).unwrap();
        assert!(c.holds && c.exact == 0.0 && c.bound == 0.0);
        assert!(path_bound_check(3, 1.0).is_err());
    }

    #[test]
    fn union_bounds() {
        let u = union_bound_report(Vec::<(&str, f64)>::new());
        assert_eq!(u.total, 0.0);
        let u = union_bound_report([("a", 0.7), ("b", 0.6)]);
        assert!(u.capped && u.total == 1.0 && (u.raw_total - 1.3).abs() < 1e-15);
    }

    #[test]
    fn default_grid_holds() {
        let grid = verification_grid();
        assert!(grid.len() > 10_000);
        for c in &grid {
            assert!(c.in_domain, "{c:?}");
            assert!(c.holds, "{c:?}");
            assert!(c.chain_holds(), "{c:?}");
        }
    }

    #[test]
    fn clock_path_sum_converges() {
        let v = clock_path_union_bound_ln(9, 2, 5.0, 5).unwrap();
        assert!(v.is_finite());
        // The first term alone is (18)^2 · 4^5 · P(5, 5).
        let first = 2.0 * libm::log(18.0) + 5.0 * libm::log(4.0) + erlang_tail_ln(5, 5.0).unwrap();
        assert!(v > first);
        assert_eq!(clock_path_union_bound_ln(9, 2, 0.0, 5).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn staged_bound_is_a_probability() {
        let b = staged_step_bound_ln(0.3, 4.0, 8);
        assert!(b < 0.0 && b > -1e-3);
    }
}
