use serde::{Deserialize, Serialize};

use super::{Glcm, RoiMask};
use crate::error::{Error, Result};

pub const FEATURE_NAMES: [&str; 8] =
    ["area", "convex_area", "equivalent_diameter", "solidity", "energy", "contrast", "homogeneity", "eccentricity"];

/// Shape and texture descriptors of one ROI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingFeatures {
    pub area: f64,
    pub convex_area: f64,
    pub equivalent_diameter: f64,
    pub solidity: f64,
    pub energy: f64,
    pub contrast: f64,
    pub homogeneity: f64,
    pub eccentricity: f64,
}

impl ImagingFeatures {
    /// Values in `FEATURE_NAMES` order.
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.area,
            self.convex_area,
            self.equivalent_diameter,
            self.solidity,
            self.energy,
            self.contrast,
            self.homogeneity,
            self.eccentricity,
        ]
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            area: v[0],
            convex_area: v[1],
            equivalent_diameter: v[2],
            solidity: v[3],
            energy: v[4],
            contrast: v[5],
            homogeneity: v[6],
            eccentricity: v[7],
        }
    }
}

pub fn equivalent_diameter(area: f64) -> f64 {
    (4.0 * area / std::f64::consts::PI).sqrt()
}

pub fn roi_features(mask: &RoiMask, g: &Glcm) -> Result<ImagingFeatures> {
    let area = mask.area();
    if area == 0 {
        return Err(Error::Imaging("empty ROI mask".into()));
    }
    let area_f = area as f64;
    let convex = convex_area(mask) as f64;
    Ok(ImagingFeatures {
        area: area_f,
        convex_area: convex,
        equivalent_diameter: equivalent_diameter(area_f),
        solidity: area_f / convex,
        energy: g.energy(),
        contrast: g.contrast(),
        homogeneity: g.homogeneity(),
        eccentricity: eccentricity(mask),
    })
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull without collinear points.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lattice points inside or on the convex hull of the member pixel centers.
pub fn convex_area(mask: &RoiMask) -> usize {
    let pts: Vec<(i64, i64)> = mask.members().map(|(x, y)| (x as i64, y as i64)).collect();
    let hull = convex_hull(pts);
    match hull.len() {
        0 => return 0,
        1 => return 1,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            return (gcd(b.0 - a.0, b.1 - a.1) + 1) as usize;
        }
        _ => {}
    }
    // A collinear set collapses to its two extremes above, so the hull here has
    // positive area and every edge gives a half-plane dy·x ≤ c or dy·x ≥ c.
    let ymin = hull.iter().map(|p| p.1).min().unwrap();
    let ymax = hull.iter().map(|p| p.1).max().unwrap();
    let xmin = hull.iter().map(|p| p.0).min().unwrap();
    let xmax = hull.iter().map(|p| p.0).max().unwrap();
    let n = hull.len();
    let mut total = 0usize;
    for y in ymin..=ymax {
        let (mut lo, mut hi) = (xmin, xmax);
        for i in 0..n {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            // Inside for a CCW edge: dx·(y − ay) − dy·(x − ax) ≥ 0.
            let c = dx * (y - a.1) + dy * a.0;
            match dy.signum() {
                1 => hi = hi.min(c.div_euclid(dy)),
                -1 => lo = lo.max(-(c.div_euclid(-dy))),
                _ => {
                    if dx * (y - a.1) < 0 {
                        hi = lo - 1;
                    }
                }
            }
        }
        if hi >= lo {
            total += (hi - lo + 1) as usize;
        }
    }
    total
}

/// Eccentricity of the ellipse with the same second central moments as the
/// mask. Each pixel contributes its own 1/12 variance along both axes.
pub fn eccentricity(mask: &RoiMask) -> f64 {
    // Central moments from exact integer sums: n²·μ₂₀ = nΣx² − (Σx)², so the
    // result is bit-identical under translation.
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128, 0i128);
    for (x, y) in mask.members() {
        let (x, y) = (x as i128, y as i128);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    if n == 0 {
        return 0.0;
    }
    let n2 = (n * n) as f64;
    let mu20 = (n * sxx - sx * sx) as f64 / n2 + 1.0 / 12.0;
    let mu02 = (n * syy - sy * sy) as f64 / n2 + 1.0 / 12.0;
    let mu11 = (n * sxy - sx * sy) as f64 / n2;
    let half_sum = (mu20 + mu02) / 2.0;
    let root = (((mu20 - mu02) / 2.0).powi(2) + mu11 * mu11).sqrt();
    let (l1, l2) = (half_sum + root, half_sum - root);
    (1.0 - l2 / l1).clamp(0.0, 1.0).sqrt()
}
