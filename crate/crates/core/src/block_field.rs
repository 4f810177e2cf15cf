//! Block-constant spin fields: independent block spins, and the field of
//! good blocks produced by [`classify_block`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::coupling::{classify_block, CouplingParams, CouplingReport};
use crate::geometry::BlockLayout;
use crate::rng::{spin_draw, uniform};
use crate::{ClockStream, Error, Geometry, Ratio, Result, Spin, SpinField, VertexSet};

/// Randomness of `Z^d` keyed by site: Bernoulli(`p`) spins and a clock
/// stream, with optional per-site redraws.
#[derive(Debug, Clone, PartialEq)]
pub struct Randomness {
    pub p: f64,
    pub spin_seed: u64,
    pub clocks: ClockStream,
    spin_overrides: BTreeMap<u64, u64>,
}

impl Randomness {
    pub fn new(p: f64, spin_seed: u64, clock_seed: u64) -> Result<Self> {
        crate::error::check_probability(p)?;
        Ok(Randomness { p, spin_seed, clocks: ClockStream::new(clock_seed), spin_overrides: BTreeMap::new() })
    }

    /// Redraws spins and clocks of the given sites.
    pub fn resample_sites(&self, sites: &[u64], fresh_seed: u64) -> Self {
        let mut r = self.clone();
        for &s in sites {
            r.spin_overrides.insert(s, fresh_seed);
        }
        r.clocks = self.clocks.resample_sites(sites.iter().copied(), fresh_seed ^ 0xA5A5_5A5A_0F0F_F0F0);
        r
    }

    /// Fresh randomness everywhere except at `sites`, which keep theirs.
    pub fn resample_all_but(&self, sites: &[u64], fresh_seed: u64) -> Self {
        let spin_overrides = sites.iter().map(|&s| (s, self.spin_seed_of(s))).collect();
        let clock_fresh = fresh_seed ^ 0xA5A5_5A5A_0F0F_F0F0;
        let mut by_seed: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &s in sites {
            by_seed.entry(self.clocks.seed_of(s)).or_default().push(s);
        }
        let mut clocks = ClockStream::new(clock_fresh);
        for (seed, group) in by_seed {
            clocks = clocks.resample_sites(group, seed);
        }
        Randomness { p: self.p, spin_seed: fresh_seed, clocks, spin_overrides }
    }

    fn spin_seed_of(&self, site: u64) -> u64 {
        *self.spin_overrides.get(&site).unwrap_or(&self.spin_seed)
    }

    /// The spins on `g`.
    pub fn field_on(&self, g: &Geometry) -> SpinField {
        if self.spin_overrides.is_empty() {
            return SpinField::sample(g, self.p, self.spin_seed).expect("density checked on construction");
        }
        SpinField::from_spins(
            g.vertices()
                .map(|x| {
                    let site = g.site_key(x);
                    spin_draw(self.spin_seed_of(site), site, self.p)
                })
                .collect(),
        )
    }
}

/// Where a block field came from.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockProvenance {
    Iid { p: f64, seed: u64 },
    Goodness { p: f64, eps: Ratio, outer_side: usize, horizon: f64, spin_seed: u64, clock_seed: u64 },
    Explicit,
}

impl BlockProvenance {
    pub fn name(&self) -> &'static str {
        match self {
            BlockProvenance::Iid { .. } => "iid",
            BlockProvenance::Goodness { .. } => "goodness",
            BlockProvenance::Explicit => "explicit",
        }
    }
}

/// One spin per block of side `L` on a box of `dims` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockField {
    block_side: usize,
    lattice: Geometry,
    spins: Vec<Spin>,
    provenance: BlockProvenance,
}

impl BlockField {
    pub fn new(block_side: usize, dims: Vec<usize>, spins: Vec<Spin>, provenance: BlockProvenance) -> Result<Self> {
        if block_side == 0 {
            return Err(Error::InvalidParameter("block side must be positive".into()));
        }
        let lattice = Geometry::new(dims, false)?;
        if spins.len() != lattice.len() {
            return Err(Error::GeometryMismatch("one spin per block"));
        }
        Ok(BlockField { block_side, lattice, spins, provenance })
    }

    /// Independent block spins, `'+'` with probability `p`.
    pub fn sample_iid(block_side: usize, dims: Vec<usize>, p: f64, seed: u64) -> Result<Self> {
        crate::error::check_probability(p)?;
        let lattice = Geometry::new(dims.clone(), false)?;
        let spins = lattice
            .vertices()
            .map(|b| if uniform(seed, 0xB10C, b as u64) < p { Spin::Plus } else { Spin::Minus })
            .collect();
        Self::new(block_side, dims, spins, BlockProvenance::Iid { p, seed })
    }

    /// Reads a vertex-level field back into blocks, failing on any block
    /// whose vertices disagree.
    pub fn from_spin_field(g: &Geometry, field: &SpinField, block_side: usize) -> Result<Self> {
        let bad = condition_one_violations(g, field, block_side)?;
        if let Some(&b) = bad.first() {
            return Err(Error::InvalidParameter(alloc::format!("block {b} is not constant ({} such blocks)", bad.len())));
        }
        let part = g.partition_into_blocks(block_side)?;
        let mut spins = alloc::vec![Spin::Plus; part.block_count()];
        for x in g.vertices() {
            spins[part.block_of(x)] = field.get(x);
        }
        Self::new(block_side, part.dims().to_vec(), spins, BlockProvenance::Explicit)
    }

    pub fn block_side(&self) -> usize {
        self.block_side
    }

    pub fn dims(&self) -> &[usize] {
        self.lattice.sides()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// The block lattice, one vertex per block.
    pub fn lattice(&self) -> &Geometry {
        &self.lattice
    }

    pub fn block_count(&self) -> usize {
        self.spins.len()
    }

    pub fn get(&self, b: usize) -> Spin {
        self.spins[b]
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn provenance(&self) -> &BlockProvenance {
        &self.provenance
    }

    /// Fraction of `'+'` blocks.
    pub fn p_effective(&self) -> f64 {
        if self.spins.is_empty() {
            return 0.0;
        }
        self.spins.iter().filter(|s| s.is_plus()).count() as f64 / self.spins.len() as f64
    }

    /// The vertex geometry the blocks tile.
    pub fn vertex_geometry(&self, wrap: bool) -> Result<Geometry> {
        Geometry::new(self.dims().iter().map(|n| n * self.block_side).collect(), wrap)
    }

    /// Copies each block spin onto its vertices.
    pub fn to_spin_field(&self, g: &Geometry) -> Result<SpinField> {
        let part = g.partition_into_blocks(self.block_side)?;
        if part.dims() != self.dims() {
            return Err(Error::GeometryMismatch("geometry is not tiled by this block field"));
        }
        Ok(SpinField::from_spins(g.vertices().map(|x| self.spins[part.block_of(x)]).collect()))
    }
}

/// Blocks of side `L` on which `field` is not constant.
pub fn condition_one_violations(g: &Geometry, field: &SpinField, block_side: usize) -> Result<Vec<usize>> {
    if field.len() != g.len() {
        return Err(Error::GeometryMismatch("field does not cover the geometry"));
    }
    let part = g.partition_into_blocks(block_side)?;
    let mut first: Vec<Option<Spin>> = alloc::vec![None; part.block_count()];
    let mut bad = VertexSet::empty(part.block_count());
    for x in g.vertices() {
        let b = part.block_of(x);
        match first[b] {
            None => first[b] = Some(field.get(x)),
            Some(s) if s != field.get(x) => {
                bad.insert(b);
            }
            _ => {}
        }
    }
    Ok(bad.to_vec())
}

/// Geometry of the goodness construction: blocks of side `n` inside
/// concentric `B'` of side `n'`, tiling a box of `dims` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessSetup {
    pub block_side: usize,
    pub outer_side: usize,
    pub dims: Vec<usize>,
    pub params: CouplingParams,
}

impl GoodnessSetup {
    pub fn lattice(&self) -> Result<Geometry> {
        Geometry::new(self.dims.clone(), false)
    }

    pub fn layout(&self, block: usize) -> Result<BlockLayout> {
        let coords = self.lattice()?.coords(block);
        BlockLayout::tiled(self.dims.len(), self.block_side, self.outer_side, &coords)
    }

    /// Classifies one block.
    pub fn classify(&self, block: usize, randomness: &Randomness) -> Result<CouplingReport> {
        let layout = self.layout(block)?;
        let field = randomness.field_on(&layout.outer_block());
        classify_block(&layout, &field, &randomness.clocks, &self.params)
    }

    /// Builds the field from per-block goodness, in block order.
    pub fn field_from(&self, good: &[bool], randomness: &Randomness) -> Result<BlockField> {
        let spins = good.iter().map(|&g| if g { Spin::Plus } else { Spin::Minus }).collect();
        BlockField::new(
            self.block_side,
            self.dims.clone(),
            spins,
            BlockProvenance::Goodness {
                p: randomness.p,
                eps: self.params.eps,
                outer_side: self.outer_side,
                horizon: self.params.horizon(self.dims.len()),
                spin_seed: randomness.spin_seed,
                clock_seed: randomness.clocks.seed(),
            },
        )
    }
}

/// Block spin `'+'` iff the block is good. Sequential; the `quench` crate
/// runs the blocks in parallel.
pub fn goodness_blockfield(setup: &GoodnessSetup, randomness: &Randomness) -> Result<BlockField> {
    let count = setup.lattice()?.len();
    let mut good = Vec::with_capacity(count);
    for b in 0..count {
        good.push(setup.classify(b, randomness)?.good);
    }
    setup.field_from(&good, randomness)
}
