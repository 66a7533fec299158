//! Dissonance over the `n = 3` sphere of symmetric zero-diagonal matrices,
//! parameterized by `(x12, x23, x31)`.
//!
//! On the coordinate sphere `x12² + x23² + x31² = 1`, `D = -6 x12 x23 x31`.
//! Each off-diagonal value appears twice in the matrix, so this sphere holds
//! matrices of Frobenius norm `√2`; [`Normalization::Matrix`] rescales to
//! unit matrix norm instead.

use std::f64::consts::PI;

use balflow_core::dissonance::dissonance;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `x12² + x23² + x31² = 1`.
    Coordinate,
    /// Unit Frobenius norm of the full matrix.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub lon_index: usize,
    pub lat_index: usize,
    pub x12: f64,
    pub x23: f64,
    pub x31: f64,
    pub d: f64,
    /// Stereographic coordinates from the pole `(0, 0, 1)`.
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Landscape {
    pub lon: usize,
    pub lat: usize,
    pub normalization: Normalization,
    pub points: Vec<GridPoint>,
}

/// Neighbouring grid values closer than this are treated as equal.
pub const PLATEAU_TOL: f64 = 1e-12;

pub fn matrix_of(x12: f64, x23: f64, x31: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, x12, x31, x12, 0.0, x23, x31, x23, 0.0])
}

/// Cell-centred longitude/latitude grid; point `(i, j)` sits at longitude
/// `2π(i + ½)/lon` and latitude `-π/2 + π(j + ½)/lat`.
pub fn grid(lon: usize, lat: usize, normalization: Normalization) -> Landscape {
    let scale = match normalization {
        Normalization::Coordinate => 1.0,
        Normalization::Matrix => 1.0 / 2f64.sqrt(),
    };
    let mut points = Vec::with_capacity(lon * lat);
    for j in 0..lat {
        let theta = -PI / 2.0 + PI * (j as f64 + 0.5) / lat as f64;
        for i in 0..lon {
            let phi = 2.0 * PI * (i as f64 + 0.5) / lon as f64;
            let (x, y, z) = (
                theta.cos() * phi.cos(),
                theta.cos() * phi.sin(),
                theta.sin(),
            );
            let (x12, x23, x31) = (scale * x, scale * y, scale * z);
            points.push(GridPoint {
                lon_index: i,
                lat_index: j,
                x12,
                x23,
                x31,
                d: -6.0 * x12 * x23 * x31,
                u: x / (1.0 - z),
                v: y / (1.0 - z),
            });
        }
    }
    Landscape {
        lon,
        lat,
        normalization,
        points,
    }
}

impl Landscape {
    pub fn at(&self, i: usize, j: usize) -> &GridPoint {
        &self.points[j * self.lon + i]
    }

    /// Grid cell containing the direction `(x12, x23, x31)`.
    pub fn cell_of(&self, x12: f64, x23: f64, x31: f64) -> (usize, usize) {
        let r = (x12 * x12 + x23 * x23 + x31 * x31).sqrt();
        let theta = (x31 / r).asin();
        let phi = x23.atan2(x12).rem_euclid(2.0 * PI);
        let i = ((phi / (2.0 * PI) * self.lon as f64) as usize).min(self.lon - 1);
        let j = (((theta + PI / 2.0) / PI * self.lat as f64) as usize).min(self.lat - 1);
        (i, j)
    }

    /// Local minima over the 8-neighbourhood, longitude wrapping. Cells
    /// tied to within `PLATEAU_TOL` count once, at the lowest flat index.
    pub fn local_minima(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for j in 0..self.lat {
            for i in 0..self.lon {
                let d = self.at(i, j).d;
                let here = j * self.lon + i;
                let mut is_min = true;
                'nb: for dj in [-1i64, 0, 1] {
                    let jj = j as i64 + dj;
                    if jj < 0 || jj >= self.lat as i64 {
                        continue;
                    }
                    for di in [-1i64, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ii = (i as i64 + di).rem_euclid(self.lon as i64) as usize;
                        let other = self.at(ii, jj as usize).d;
                        let tied = (other - d).abs() <= PLATEAU_TOL;
                        if (!tied && other < d) || (tied && jj as usize * self.lon + ii < here) {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
                if is_min {
                    out.push(*self.at(i, j));
                }
            }
        }
        out
    }

    /// Minima whose value lies within `tol` of the lowest grid value.
    pub fn global_minima(&self, tol: f64) -> Vec<GridPoint> {
        let lowest = self
            .points
            .iter()
            .map(|p| p.d)
            .fold(f64::INFINITY, f64::min);
        self.local_minima()
            .into_iter()
            .filter(|p| p.d <= lowest + tol)
            .collect()
    }

    pub fn to_csv(&self, stereographic: bool) -> String {
        use std::fmt::Write as _;
        let mut out = String::from(if stereographic {
            "x12,x23,x31,D,u,v\n"
        } else {
            "x12,x23,x31,D\n"
        });
        for p in &self.points {
            write!(out, "{:e},{:e},{:e},{:e}", p.x12, p.x23, p.x31, p.d).unwrap();
            if stereographic {
                write!(out, ",{:e},{:e}", p.u, p.v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Cross-check of the closed form against the trace formula.
pub fn trace_dissonance(p: &GridPoint) -> f64 {
    dissonance(&matrix_of(p.x12, p.x23, p.x31))
}

/// Grid distance between cells, with longitude wrap.
pub fn cell_distance(lon: usize, a: (usize, usize), b: (usize, usize)) -> usize {
    let di = a.0.abs_diff(b.0);
    let di = di.min(lon - di);
    di.max(a.1.abs_diff(b.1))
}
