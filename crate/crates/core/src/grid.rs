//! Regular grids, their discrete frequency duals, and field realizations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer lag vector in grid units. The second entry is 0 for `d = 1`.
pub type Lag = [i64; 2];

/// Regular grid with `sizes[0] × sizes[1]` points (`sizes[1] == 1` for
/// `d = 1`), row-major with axis 0 slowest.
///
/// Periodic grids (the torus used by the spectral and convolution samplers)
/// need power-of-two sizes of at least 8; lattices for the Markov
/// construction may have any positive size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecRaw", into = "GridSpecRaw")]
pub struct GridSpec {
    d: usize,
    sizes: [usize; 2],
    spacing: f64,
    periodic: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpecRaw {
    d: usize,
    sizes: Vec<usize>,
    spacing: f64,
    #[serde(default = "default_periodic")]
    periodic: bool,
}

fn default_periodic() -> bool {
    true
}

impl TryFrom<GridSpecRaw> for GridSpec {
    type Error = Error;

    fn try_from(raw: GridSpecRaw) -> Result<Self> {
        if raw.sizes.len() != raw.d {
            return Err(Error::InvalidParameter(format!(
                "grid has d = {} but {} sizes",
                raw.d,
                raw.sizes.len()
            )));
        }
        if raw.periodic {
            GridSpec::periodic(&raw.sizes, raw.spacing)
        } else {
            GridSpec::lattice(&raw.sizes, raw.spacing)
        }
    }
}

impl From<GridSpec> for GridSpecRaw {
    fn from(g: GridSpec) -> Self {
        GridSpecRaw {
            d: g.d,
            sizes: g.sizes[..g.d].to_vec(),
            spacing: g.spacing,
            periodic: g.periodic,
        }
    }
}

fn check_dims(sizes: &[usize], spacing: f64) -> Result<(usize, [usize; 2])> {
    let d = sizes.len();
    if !(1..=2).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {d}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
    }
    let mut out = [1usize; 2];
    out[..d].copy_from_slice(sizes);
    Ok((d, out))
}

impl GridSpec {
    /// Periodic grid for spectral and convolution sampling.
    pub fn periodic(sizes: &[usize], spacing: f64) -> Result<Self> {
        let (d, sizes_arr) = check_dims(sizes, spacing)?;
        for &m in sizes {
            if m < 8 || !m.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "periodic grid sizes must be powers of two >= 8, got {m}"
                )));
            }
        }
        Ok(GridSpec { d, sizes: sizes_arr, spacing, periodic: true })
    }

    /// Non-periodic lattice (Markov construction).
    pub fn lattice(sizes: &[usize], spacing: f64) -> Result<Self> {
        let (d, sizes_arr) = check_dims(sizes, spacing)?;
        if sizes.iter().any(|&m| m == 0) {
            return Err(Error::InvalidParameter("lattice sizes must be positive".into()));
        }
        Ok(GridSpec { d, sizes: sizes_arr, spacing, periodic: false })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Sizes padded to two axes.
    pub fn sizes(&self) -> [usize; 2] {
        self.sizes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn num_sites(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.d as i32)
    }

    pub fn site_index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.sizes[1] + i1
    }

    pub fn site_coords(&self, index: usize) -> [usize; 2] {
        [index / self.sizes[1], index % self.sizes[1]]
    }

    /// Physical position of a site.
    pub fn position(&self, index: usize) -> [f64; 2] {
        let [a, b] = self.site_coords(index);
        [a as f64 * self.spacing, b as f64 * self.spacing]
    }

    /// Site reached from `index` by the lag `h`, wrapping around the torus.
    pub fn shifted(&self, index: usize, h: Lag) -> usize {
        let [a, b] = self.site_coords(index);
        let wrap = |x: usize, dx: i64, m: usize| -> usize { (x as i64 + dx).rem_euclid(m as i64) as usize };
        self.site_index(wrap(a, h[0], self.sizes[0]), wrap(b, h[1], self.sizes[1]))
    }

    /// Minimum-image displacement `to - from` on the torus, in grid units.
    pub fn displacement(&self, from: usize, to: usize) -> Lag {
        let f = self.site_coords(from);
        let t = self.site_coords(to);
        let mut out = [0i64; 2];
        for axis in 0..2 {
            let m = self.sizes[axis] as i64;
            let mut dx = t[axis] as i64 - f[axis] as i64;
            if self.periodic {
                dx = dx.rem_euclid(m);
                if dx > m / 2 {
                    dx -= m;
                }
            }
            out[axis] = dx;
        }
        out
    }

    /// Wraps a lag into the signed range `(-m/2, m/2]` per axis.
    pub fn canonical_lag(&self, h: Lag) -> Lag {
        let mut out = [0i64; 2];
        for axis in 0..2 {
            let m = self.sizes[axis] as i64;
            let mut v = h[axis].rem_euclid(m);
            if v > m / 2 {
                v -= m;
            }
            out[axis] = v;
        }
        out
    }
}

/// Which construction produced a realization. The discriminants are the
/// tag bytes of the binary field format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    Spectral = 0,
    Convolution = 1,
    Markov = 2,
}

impl Construction {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Construction::Spectral),
            1 => Ok(Construction::Convolution),
            2 => Ok(Construction::Markov),
            t => Err(Error::Format(format!("unknown construction tag {t}"))),
        }
    }
}

/// A p-variate real field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub grid: GridSpec,
    pub p: usize,
    /// Component-major: `values[c * n + site]`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u32,
    pub construction: Construction,
}

impl Realization {
    pub fn new(
        grid: GridSpec,
        p: usize,
        values: Vec<f64>,
        seed: u64,
        replicate: u32,
        construction: Construction,
    ) -> Result<Self> {
        if values.len() != p * grid.num_sites() {
            return Err(Error::Shape(format!(
                "expected {} values for p = {p}, got {}",
                p * grid.num_sites(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value at position {bad}")));
        }
        Ok(Realization { grid, p, values, seed, replicate, construction })
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.num_sites();
        &self.values[c * n..(c + 1) * n]
    }
}

/// Classification of a discrete frequency under `k ↦ -k (mod m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreqClass {
    /// `-k ≡ k`: zero and Nyquist indices.
    SelfConjugate,
    /// The member of a conjugate pair with the smaller linear index.
    Representative,
    /// The member with the larger linear index; its values are conjugates.
    Reflected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyPoint {
    pub index: [usize; 2],
    /// Angular frequency `2π k / (m h)` with `k` in the signed FFT range.
    pub omega: [f64; 2],
    pub class: FreqClass,
    /// Linear index of the frequency `-k`.
    pub partner: usize,
}

/// The discrete dual of a periodic grid, in FFT (linear, row-major) order.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    grid: GridSpec,
    points: Vec<FrequencyPoint>,
}

/// Builds the frequency lattice dual to a periodic grid and labels every
/// index as self-conjugate, half-space representative, or reflection.
pub fn build_frequency_grid(grid: &GridSpec) -> FrequencyGrid {
    let [m0, m1] = grid.sizes();
    let h = grid.spacing();
    let signed = |k: usize, m: usize| -> f64 {
        if k <= m / 2 {
            k as f64
        } else {
            k as f64 - m as f64
        }
    };
    let mut points = Vec::with_capacity(m0 * m1);
    for k0 in 0..m0 {
        for k1 in 0..m1 {
            let lin = k0 * m1 + k1;
            let r0 = (m0 - k0) % m0;
            let r1 = (m1 - k1) % m1;
            let partner = r0 * m1 + r1;
            let class = match lin.cmp(&partner) {
                std::cmp::Ordering::Equal => FreqClass::SelfConjugate,
                std::cmp::Ordering::Less => FreqClass::Representative,
                std::cmp::Ordering::Greater => FreqClass::Reflected,
            };
            let mut omega = [0.0; 2];
            omega[0] = 2.0 * PI * signed(k0, m0) / (m0 as f64 * h);
            if grid.d() == 2 {
                omega[1] = 2.0 * PI * signed(k1, m1) / (m1 as f64 * h);
            }
            points.push(FrequencyPoint { index: [k0, k1], omega, class, partner });
        }
    }
    FrequencyGrid { grid: *grid, points }
}

impl FrequencyGrid {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn points(&self) -> &[FrequencyPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Volume of one frequency cell, `Π_a 2π / (m_a h)`.
    pub fn cell_measure(&self) -> f64 {
        let h = self.grid.spacing();
        let [m0, m1] = self.grid.sizes();
        let mut v = 2.0 * PI / (m0 as f64 * h);
        if self.grid.d() == 2 {
            v *= 2.0 * PI / (m1 as f64 * h);
        }
        v
    }
}
