//! Finite pieces of `Z^d`: periodic tori and free rectangular blocks.
//!
//! Vertices are mixed-radix integers over the side lengths, with axis 0 the
//! fastest-varying digit. Every geometry also carries an `origin` that
//! places its local coordinate `0` somewhere in `Z^d`; the origin only
//! matters for [`Geometry::site_key`], which is how two geometries covering
//! the same sites end up reading the same randomness.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, VertexSet};

/// Canonical vertex index.
pub type Vertex = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    sides: Vec<usize>,
    strides: Vec<usize>,
    origin: Vec<i64>,
    wrap: bool,
    len: usize,
}

impl Geometry {
    pub fn new(sides: Vec<usize>, wrap: bool) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if sides.contains(&0) {
            return Err(Error::InvalidParameter("side lengths must be positive".into()));
        }
        let mut strides = Vec::with_capacity(sides.len());
        let mut len: usize = 1;
        for &s in &sides {
            strides.push(len);
            len = len
                .checked_mul(s)
                .ok_or_else(|| Error::InvalidParameter("vertex count overflows".into()))?;
        }
        let origin = vec![0; sides.len()];
        Ok(Geometry { sides, strides, origin, wrap, len })
    }

    /// The periodic torus `[n]^d`.
    pub fn torus(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; d], true)
    }

    /// The free block `{0..n}^d` with no wrap-around.
    pub fn block(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; d], false)
    }

    /// Places local coordinate `0` at `origin` in `Z^d`.
    pub fn with_origin(mut self, origin: Vec<i64>) -> Result<Self> {
        if origin.len() != self.dim() {
            return Err(Error::GeometryMismatch("origin dimension"));
        }
        self.origin = origin;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn is_wrapped(&self) -> bool {
        self.wrap
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vertices(&self) -> core::ops::Range<Vertex> {
        0..self.len
    }

    pub fn check(&self, x: Vertex) -> Result<()> {
        if x < self.len {
            Ok(())
        } else {
            Err(Error::InvalidVertex { vertex: x, count: self.len })
        }
    }

    #[inline]
    pub fn coord(&self, x: Vertex, axis: usize) -> usize {
        (x / self.strides[axis]) % self.sides[axis]
    }

    pub fn coords(&self, x: Vertex) -> Vec<usize> {
        (0..self.dim()).map(|a| self.coord(x, a)).collect()
    }

    pub fn index(&self, coords: &[usize]) -> Result<Vertex> {
        if coords.len() != self.dim() {
            return Err(Error::GeometryMismatch("coordinate dimension"));
        }
        let mut x = 0;
        for (a, &c) in coords.iter().enumerate() {
            if c >= self.sides[a] {
                return Err(Error::InvalidParameter(alloc::format!(
                    "coordinate {c} on axis {a} exceeds side {}",
                    self.sides[a]
                )));
            }
            x += c * self.strides[a];
        }
        Ok(x)
    }

    /// Position of `x` in `Z^d`.
    pub fn global_coords(&self, x: Vertex) -> Vec<i64> {
        (0..self.dim()).map(|a| self.origin[a] + self.coord(x, a) as i64).collect()
    }

    /// Index of the vertex sitting at `global` in `Z^d`, if any.
    pub fn from_global(&self, global: &[i64]) -> Option<Vertex> {
        if global.len() != self.dim() {
            return None;
        }
        let mut x = 0;
        for (a, &g) in global.iter().enumerate() {
            let c = g - self.origin[a];
            let side = self.sides[a] as i64;
            let c = if self.wrap { c.rem_euclid(side) } else { c };
            if !(0..side).contains(&c) {
                return None;
            }
            x += c as usize * self.strides[a];
        }
        Some(x)
    }

    /// Identifier of the site of `x` in `Z^d`, used to key randomness.
    pub fn site_key(&self, x: Vertex) -> u64 {
        let mut h = crate::rng::mix64(self.dim() as u64 ^ 0x5173_e4a1_0c3d_9b27);
        for a in 0..self.dim() {
            let g = self.origin[a] + self.coord(x, a) as i64;
            h = crate::rng::mix64(h ^ (g as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
        h
    }

    /// Calls `f` once for every distinct neighbour of `x` other than `x`.
    #[inline]
    pub fn for_each_neighbor(&self, x: Vertex, mut f: impl FnMut(Vertex)) {
        for a in 0..self.dim() {
            let side = self.sides[a];
            let stride = self.strides[a];
            let c = self.coord(x, a);
            let base = x - c * stride;
            let up = if c + 1 < side {
                Some(c + 1)
            } else if self.wrap && side > 1 {
                Some(0)
            } else {
                None
            };
            let down = if c > 0 {
                Some(c - 1)
            } else if self.wrap && side > 1 {
                Some(side - 1)
            } else {
                None
            };
            if let Some(u) = up {
                f(base + u * stride);
            }
            if let Some(dn) = down {
                // A side of two wraps both ways onto the same vertex.
                if Some(dn) != up {
                    f(base + dn * stride);
                }
            }
        }
    }

    /// Neighbours of `x`, in increasing index order.
    pub fn neighbors(&self, x: Vertex) -> Result<Vec<Vertex>> {
        self.check(x)?;
        let mut out = Vec::with_capacity(2 * self.dim());
        self.for_each_neighbor(x, |y| out.push(y));
        out.sort_unstable();
        Ok(out)
    }

    pub fn degree(&self, x: Vertex) -> usize {
        let mut k = 0;
        self.for_each_neighbor(x, |_| k += 1);
        k
    }

    /// Graph distance: L1 on a free block, per-axis `min(|δ|, side − |δ|)`
    /// summed on a torus.
    pub fn distance(&self, x: Vertex, y: Vertex) -> Result<usize> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, x: Vertex, y: Vertex) -> usize {
        (0..self.dim())
            .map(|a| {
                let delta = self.coord(x, a).abs_diff(self.coord(y, a));
                if self.wrap {
                    delta.min(self.sides[a] - delta)
                } else {
                    delta
                }
            })
            .sum()
    }

    /// Vertices at distance exactly `j` from `x`.
    pub fn sphere(&self, x: Vertex, j: usize) -> Result<VertexSet> {
        self.check(x)?;
        Ok(VertexSet::from_predicate(self.len, |y| self.distance_unchecked(x, y) == j))
    }

    /// Vertices at distance at most `radius` from `x`.
    pub fn ball(&self, x: Vertex, radius: usize) -> Result<VertexSet> {
        self.check(x)?;
        Ok(VertexSet::from_predicate(self.len, |y| self.distance_unchecked(x, y) <= radius))
    }

    /// Vertices within `radius` of some vertex of `set`.
    pub fn neighbourhood(&self, set: &VertexSet, radius: usize) -> VertexSet {
        let mut out = set.clone();
        let mut frontier: Vec<Vertex> = set.iter().collect();
        for _ in 0..radius {
            let mut next = Vec::new();
            for &v in &frontier {
                self.for_each_neighbor(v, |w| {
                    if out.insert(w) {
                        next.push(w);
                    }
                });
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        out
    }

    /// Compressed adjacency lists for the hot loops of the engines.
    pub fn adjacency(&self) -> Adjacency {
        let mut offsets = Vec::with_capacity(self.len + 1);
        let mut targets = Vec::with_capacity(self.len * 2 * self.dim());
        offsets.push(0);
        for x in self.vertices() {
            self.for_each_neighbor(x, |y| targets.push(y as u32));
            offsets.push(targets.len() as u32);
        }
        Adjacency { offsets, targets }
    }

    /// Tiles the geometry with axis-aligned blocks of side `block_side`.
    pub fn partition_into_blocks(&self, block_side: usize) -> Result<BlockPartition> {
        if block_side == 0 {
            return Err(Error::InvalidParameter("block side must be positive".into()));
        }
        for (axis, &side) in self.sides.iter().enumerate() {
            if side % block_side != 0 {
                return Err(Error::NonDivisibleSide { axis, side, block: block_side });
            }
        }
        let dims: Vec<usize> = self.sides.iter().map(|s| s / block_side).collect();
        let lattice = Geometry::new(dims.clone(), false)?;
        let block_of = self
            .vertices()
            .map(|x| {
                let mut b = 0;
                for a in 0..self.dim() {
                    b += (self.coord(x, a) / block_side) * lattice.strides[a];
                }
                b
            })
            .collect();
        Ok(BlockPartition { block_side, lattice, block_of })
    }
}

/// Neighbour lists in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Adjacency {
    #[inline]
    pub fn neighbors(&self, x: Vertex) -> &[u32] {
        &self.targets[self.offsets[x] as usize..self.offsets[x + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, x: Vertex) -> usize {
        (self.offsets[x + 1] - self.offsets[x]) as usize
    }
}

/// L∞ distance between two block indices on the block lattice.
pub fn linf_block_distance(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0)
}

/// Assignment of each vertex of a geometry to one block of side `L`.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    block_side: usize,
    lattice: Geometry,
    block_of: Vec<usize>,
}

impl BlockPartition {
    pub fn block_side(&self) -> usize {
        self.block_side
    }

    /// Number of blocks per axis.
    pub fn dims(&self) -> &[usize] {
        self.lattice.sides()
    }

    pub fn block_count(&self) -> usize {
        self.lattice.len()
    }

    pub fn block_of(&self, x: Vertex) -> usize {
        self.block_of[x]
    }

    pub fn block_coords(&self, b: usize) -> Vec<usize> {
        self.lattice.coords(b)
    }

    pub fn block_index(&self, coords: &[usize]) -> Result<usize> {
        self.lattice.index(coords)
    }

    pub fn members(&self, b: usize) -> Vec<Vertex> {
        self.block_of.iter().enumerate().filter(|&(_, &c)| c == b).map(|(x, _)| x).collect()
    }

    pub fn linf_distance(&self, a: usize, b: usize) -> usize {
        linf_block_distance(&self.block_coords(a), &self.block_coords(b))
    }
}

/// A block `B` of side `n` inside the concentric block `B'` of side `n'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    d: usize,
    inner_side: usize,
    outer_side: usize,
    outer_origin: Vec<i64>,
}

impl BlockLayout {
    pub fn new(d: usize, inner_side: usize, outer_side: usize, outer_origin: Vec<i64>) -> Result<Self> {
        if d == 0 || inner_side == 0 {
            return Err(Error::InvalidParameter("dimension and inner side must be positive".into()));
        }
        if outer_side < inner_side || (outer_side - inner_side) % 2 != 0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "outer side {outer_side} must be at least inner side {inner_side} with an even difference"
            )));
        }
        if outer_origin.len() != d {
            return Err(Error::GeometryMismatch("layout origin dimension"));
        }
        Ok(BlockLayout { d, inner_side, outer_side, outer_origin })
    }

    /// Sides `n = 3·2^d` and `n' = 5·2^d`.
    pub fn standard(d: usize) -> Result<Self> {
        let unit = 1usize
            .checked_shl(d as u32)
            .ok_or_else(|| Error::InvalidParameter("dimension too large".into()))?;
        Self::new(d, 3 * unit, 5 * unit, vec![0; d])
    }

    /// Layout for the block with index `block` in a tiling of `Z^d` by
    /// blocks of side `inner_side`.
    pub fn tiled(d: usize, inner_side: usize, outer_side: usize, block: &[usize]) -> Result<Self> {
        let pad = outer_side.saturating_sub(inner_side) as i64 / 2;
        let origin = block.iter().map(|&b| (b * inner_side) as i64 - pad).collect();
        Self::new(d, inner_side, outer_side, origin)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn inner_side(&self) -> usize {
        self.inner_side
    }

    pub fn outer_side(&self) -> usize {
        self.outer_side
    }

    /// Gap between the faces of `B` and `B'`.
    pub fn margin(&self) -> usize {
        (self.outer_side - self.inner_side) / 2
    }

    pub fn is_degenerate(&self) -> bool {
        self.inner_side == self.outer_side
    }

    /// `Z^d[B']`: the free block on the sites of `B'`.
    pub fn outer_block(&self) -> Geometry {
        Geometry::new(vec![self.outer_side; self.d], false)
            .and_then(|g| g.with_origin(self.outer_origin.clone()))
            .expect("validated layout")
    }

    /// The torus on the sites of `B'`.
    pub fn outer_torus(&self) -> Geometry {
        Geometry::new(vec![self.outer_side; self.d], true)
            .and_then(|g| g.with_origin(self.outer_origin.clone()))
            .expect("validated layout")
    }

    /// `B'` plus a one-site layer around it, as a free block of side `n' + 2`.
    /// Corner sites of this box are not adjacent to `B'`; see [`Self::collar`].
    pub fn frame(&self) -> Geometry {
        let origin = self.outer_origin.iter().map(|o| o - 1).collect();
        Geometry::new(vec![self.outer_side + 2; self.d], false)
            .and_then(|g| g.with_origin(origin))
            .expect("validated layout")
    }

    /// Sites of `B` as a subset of [`Self::outer_block`] (or the torus).
    pub fn inner_set(&self) -> VertexSet {
        let g = self.outer_block();
        let lo = self.margin();
        let hi = lo + self.inner_side;
        VertexSet::from_predicate(g.len(), |x| (0..self.d).all(|a| (lo..hi).contains(&g.coord(x, a))))
    }

    /// Sites outside `B'` adjacent to `B'`, as a subset of [`Self::frame`].
    pub fn collar(&self) -> VertexSet {
        let f = self.frame();
        let last = self.outer_side + 1;
        VertexSet::from_predicate(f.len(), |x| {
            let boundary_axes = (0..self.d).filter(|&a| matches!(f.coord(x, a), 0) || f.coord(x, a) == last).count();
            boundary_axes == 1
        })
    }

    /// Sites of `B'` as a subset of [`Self::frame`].
    pub fn outer_in_frame(&self) -> VertexSet {
        let f = self.frame();
        let last = self.outer_side + 1;
        VertexSet::from_predicate(f.len(), |x| (0..self.d).all(|a| (1..last).contains(&f.coord(x, a))))
    }

    /// Sites of `B` as a subset of [`Self::frame`].
    pub fn inner_in_frame(&self) -> VertexSet {
        let f = self.frame();
        let lo = self.margin() + 1;
        let hi = lo + self.inner_side;
        VertexSet::from_predicate(f.len(), |x| (0..self.d).all(|a| (lo..hi).contains(&f.coord(x, a))))
    }

    /// Default horizon `200 d^5 + d`.
    pub fn default_horizon(&self) -> f64 {
        let d = self.d as f64;
        200.0 * d * d * d * d * d + d
    }
}
