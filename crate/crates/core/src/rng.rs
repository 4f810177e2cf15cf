//! Counter-based randomness.
//!
//! Every draw is a pure function of `(master seed, purpose, site, counter)`,
//! where `site` is a [`Geometry::site_key`]. Nothing is stateful, so two
//! processes that look at the same site read the same clock, a region can
//! be resampled by swapping the seed of its sites only, and the order in
//! which draws are requested never matters.
//!
//! Replicas use seeds from [`split_seed`], which hashes the master seed
//! together with the replica index.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::check_probability;
use crate::{Geometry, Result, Vertex, VertexSet};

const SPIN: u64 = 0x7370_696e;
const CLOCK: u64 = 0x636c_6f63;
const COIN: u64 = 0x636f_696e;
const REPLICA: u64 = 0x7265_706c;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn draw(seed: u64, purpose: u64, site: u64, counter: u64) -> u64 {
    let mut h = mix64(seed ^ 0x2545_f491_4f6c_dd1d);
    h = mix64(h ^ purpose);
    h = mix64(h ^ site);
    mix64(h ^ counter.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Maps 52 random bits to `(k + 1/2)·2^-52`: never 0, never 1, never 1/2,
/// and `1 − u` is exact.
#[inline]
pub fn unit(bits: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 52) as f64;
    ((bits >> 12) as f64 + 0.5) * SCALE
}

/// Seed of replica `index` under master seed `master`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    draw(master, REPLICA, 0, index)
}

/// A uniform draw in `(0, 1)` for ad-hoc use (site choice in tests, etc.).
pub fn uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    unit(draw(seed, stream, 0x6164_686f, counter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    pub fn flip(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Spin::Plus
    }

    pub fn symbol(self) -> char {
        match self {
            Spin::Plus => '+',
            Spin::Minus => '-',
        }
    }
}

/// Where a spin field came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Independent Bernoulli spins; `resampled` lists the fresh seeds of
    /// regions redrawn since.
    Bernoulli { seed: u64, p: f64, resampled: Vec<u64> },
    Explicit,
}

/// A `±` assignment over the vertices of one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinField {
    spins: Vec<Spin>,
    provenance: Provenance,
}

impl SpinField {
    /// Independent spins, `'+'` with probability `p`, keyed by site.
    pub fn sample(g: &Geometry, p: f64, seed: u64) -> Result<Self> {
        check_probability(p)?;
        let spins = g.vertices().map(|x| spin_draw(seed, g.site_key(x), p)).collect();
        Ok(SpinField { spins, provenance: Provenance::Bernoulli { seed, p, resampled: Vec::new() } })
    }

    pub fn constant(g: &Geometry, s: Spin) -> Self {
        SpinField { spins: alloc::vec![s; g.len()], provenance: Provenance::Explicit }
    }

    pub fn from_spins(spins: Vec<Spin>) -> Self {
        SpinField { spins, provenance: Provenance::Explicit }
    }

    /// `'−'` exactly on `minus`.
    pub fn from_minus_set(minus: &VertexSet) -> Self {
        let spins = (0..minus.universe()).map(|x| if minus.contains(x) { Spin::Minus } else { Spin::Plus }).collect();
        Self::from_spins(spins)
    }

    /// Redraws the spins on `region` with `fresh_seed`, leaving the rest.
    pub fn resample_region(&self, g: &Geometry, region: &VertexSet, fresh_seed: u64) -> Result<Self> {
        if region.universe() != self.len() || g.len() != self.len() {
            return Err(crate::Error::GeometryMismatch("region and field sizes differ"));
        }
        let p = match &self.provenance {
            Provenance::Bernoulli { p, .. } => *p,
            Provenance::Explicit => {
                return Err(crate::Error::InvalidParameter("explicit field has no density to resample from".into()))
            }
        };
        let mut out = self.clone();
        for x in region.iter() {
            out.spins[x] = spin_draw(fresh_seed, g.site_key(x), p);
        }
        if let Provenance::Bernoulli { resampled, .. } = &mut out.provenance {
            resampled.push(fresh_seed);
        }
        Ok(out)
    }

    /// Every spin reversed.
    pub fn flipped(&self) -> Self {
        SpinField { spins: self.spins.iter().map(|s| s.flip()).collect(), provenance: Provenance::Explicit }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    #[inline]
    pub fn get(&self, x: Vertex) -> Spin {
        self.spins[x]
    }

    pub fn set(&mut self, x: Vertex, s: Spin) {
        self.spins[x] = s;
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn minus_set(&self) -> VertexSet {
        VertexSet::from_predicate(self.len(), |x| self.spins[x] == Spin::Minus)
    }

    pub fn plus_count(&self) -> usize {
        self.spins.iter().filter(|s| s.is_plus()).count()
    }

    /// Mean spin in `[-1, 1]`.
    pub fn magnetization(&self) -> f64 {
        if self.spins.is_empty() {
            return 0.0;
        }
        let sum: i64 = self.spins.iter().map(|s| s.sign() as i64).sum();
        sum as f64 / self.spins.len() as f64
    }

    pub fn all(&self, s: Spin) -> bool {
        self.spins.iter().all(|&t| t == s)
    }

    /// Pointwise `self ≤ other` with `'−' < '+'`.
    pub fn le(&self, other: &SpinField) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a <= b)
    }
}

#[inline]
/// The spin of `site` in a Bernoulli(`p`) field drawn from `seed`.
pub fn spin_draw(seed: u64, site: u64, p: f64) -> Spin {
    if unit(draw(seed, SPIN, site, 0)) < p {
        Spin::Plus
    } else {
        Spin::Minus
    }
}

/// Rate-one Poisson clocks and tie coins for every site of `Z^d`.
///
/// Ring `k` (from 1) of a site happens at the sum of the first `k`
/// exponential gaps of that site. The tie coin used at ring `k` is indexed
/// by the same ordinal, so coupled runs that share a stream also share
/// coins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockStream {
    seed: u64,
    mirrored: bool,
    overrides: BTreeMap<u64, u64>,
}

impl ClockStream {
    pub fn new(seed: u64) -> Self {
        ClockStream { seed, mirrored: false, overrides: BTreeMap::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same rings, tie coins `u ↦ 1 − u`.
    pub fn mirrored(&self) -> Self {
        let mut c = self.clone();
        c.mirrored = !c.mirrored;
        c
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    /// Redraws the clocks and coins of the given sites from `fresh_seed`.
    pub fn resample_sites<I: IntoIterator<Item = u64>>(&self, sites: I, fresh_seed: u64) -> Self {
        let mut c = self.clone();
        for s in sites {
            c.overrides.insert(s, fresh_seed);
        }
        c
    }

    /// Redraws the clocks of `region` of geometry `g`.
    pub fn resample_region(&self, g: &Geometry, region: &VertexSet, fresh_seed: u64) -> Self {
        self.resample_sites(region.iter().map(|x| g.site_key(x)), fresh_seed)
    }

    /// Seed of the stream driving `site`.
    #[inline]
    pub fn seed_of(&self, site: u64) -> u64 {
        if self.overrides.is_empty() {
            self.seed
        } else {
            *self.overrides.get(&site).unwrap_or(&self.seed)
        }
    }

    /// Waiting time before ring `k` (1-based), always positive.
    #[inline]
    pub fn gap(&self, site: u64, k: u64) -> f64 {
        -libm::log(unit(draw(self.seed_of(site), CLOCK, site, k)))
    }

    /// Tie coin in `(0, 1)` for ring `k` of `site`.
    #[inline]
    pub fn tie_coin(&self, site: u64, k: u64) -> f64 {
        let u = unit(draw(self.seed_of(site), COIN, site, k));
        if self.mirrored {
            1.0 - u
        } else {
            u
        }
    }

    /// Ring times of `site` in increasing order, starting from ring 1.
    pub fn rings(&self, site: u64) -> Rings<'_> {
        Rings { clocks: self, site, ordinal: 0, time: 0.0 }
    }

    /// First ring time of `site`.
    pub fn first_ring(&self, site: u64) -> f64 {
        self.gap(site, 1)
    }

    /// All ring times of `site` in the window `[a, b]`, sorted.
    pub fn rings_in(&self, site: u64, a: f64, b: f64) -> Vec<f64> {
        if !(a < b) {
            return Vec::new();
        }
        self.rings(site).map(|(_, t)| t).skip_while(|&t| t < a).take_while(|&t| t <= b).collect()
    }

    /// Number of rings of `site` in `[0, t]`.
    pub fn ring_count(&self, site: u64, t: f64) -> usize {
        self.rings(site).take_while(|&(_, s)| s <= t).count()
    }
}

/// Iterator over `(ordinal, time)` of the rings of one site.
#[derive(Debug, Clone)]
pub struct Rings<'a> {
    clocks: &'a ClockStream,
    site: u64,
    ordinal: u64,
    time: f64,
}

impl Iterator for Rings<'_> {
    type Item = (u64, f64);

    #[inline]
    fn next(&mut self) -> Option<(u64, f64)> {
        self.ordinal += 1;
        self.time += self.clocks.gap(self.site, self.ordinal);
        Some((self.ordinal, self.time))
    }
}
