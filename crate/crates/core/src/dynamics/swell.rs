//! Circular-orbit swell model in the vertical plane:
//! `x = a + R(b) cos(w t - phi(a))`, `y = b + R(b) sin(w t - phi(a))` with
//! `phi(a) = k a + c` and `R(b) = R0 exp(-k_R b)`. The motion is
//! incompressible exactly when `k_R = k`.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::ExprMap;
use crate::linalg;
use crate::sampling::SampleBox;

use super::MotionFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwellParams {
    pub r0: f64,
    pub k: f64,
    pub omega: f64,
    pub c: f64,
    /// Decay rate of the radius; `None` means `k`.
    #[serde(default)]
    pub k_r: Option<f64>,
}

impl Default for SwellParams {
    fn default() -> Self {
        SwellParams {
            r0: 1.0,
            k: 0.1,
            omega: 1.0,
            c: 0.0,
            k_r: None,
        }
    }
}

impl SwellParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.r0, self.k, self.omega, self.c, self.k_r.unwrap_or(self.k)]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.k <= 0.0 || self.r0 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "swell needs k > 0 and R0 >= 0, got k = {}, R0 = {}",
                self.k, self.r0
            )));
        }
        Ok(())
    }

    pub fn radius(&self, b: f64) -> f64 {
        self.r0 * (-self.k_r.unwrap_or(self.k) * b).exp()
    }

    pub fn position(&self, a: f64, b: f64, t: f64) -> (f64, f64) {
        let r = self.radius(b);
        let th = self.omega * t - self.k * a - self.c;
        (a + r * th.cos(), b + r * th.sin())
    }

    /// Phase speed of the moving frame.
    pub fn celerity(&self) -> f64 {
        self.omega / self.k
    }

    fn map_text(&self) -> String {
        let kr = self.k_r.unwrap_or(self.k);
        let (r0, k, w, c) = (self.r0, self.k, self.omega, self.c);
        let th = format!("({w}*x1 - {k}*y1 - {c})");
        format!("y1 + {r0}*exp(-{kr}*y2)*cos{th}, y2 + {r0}*exp(-{kr}*y2)*sin{th}")
    }
}

/// The family `(a, b) -> (x, y)` with time as the single parameter.
pub fn swell_family(p: &SwellParams, bounds: SampleBox) -> Result<MotionFamily> {
    p.validate()?;
    MotionFamily::new("swell", 2, 1, &p.map_text(), None, None, bounds)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SwellReport {
    pub samples: usize,
    /// Max `|J(a, b, t) - J(a, b, 0)|` for `J = d(x, y)/d(a, b)`.
    pub jacobian_drift: f64,
    /// Max `| |(x, y) - (a, b)| - R(b) |`.
    pub circle_deviation: f64,
    /// Max change in time of `(x - c t, y)` at fixed `a - c t`, `c = w/k`.
    pub moving_frame_drift: f64,
}

/// Checks at `(a, b, t)` samples.
pub fn swell_check(p: &SwellParams, samples: &[Vec<f64>]) -> Result<SwellReport> {
    p.validate()?;
    let map = ExprMap::parse_with_vars(&["y1", "y2", "x1"], &p.map_text())?;
    let jac = |a: f64, b: f64, t: f64| -> Result<f64> {
        let j = map.taylor_lift(&[a, b, t], 1)?.first_order();
        Ok(linalg::determinant(&vec![j[0][..2].to_vec(), j[1][..2].to_vec()]))
    };
    let cel = p.celerity();
    let mut rep = SwellReport {
        samples: samples.len(),
        ..Default::default()
    };
    for s in samples {
        let (a, b, t) = (s[0], s[1], s[2]);
        rep.jacobian_drift = rep.jacobian_drift.max((jac(a, b, t)? - jac(a, b, 0.0)?).abs());
        let (x, y) = p.position(a, b, t);
        rep.circle_deviation = rep.circle_deviation.max(((x - a).hypot(y - b) - p.radius(b)).abs());
        // a plays the role of a-bar here
        let (xm, ym) = p.position(a + cel * t, b, t);
        let (x0, y0) = p.position(a, b, 0.0);
        rep.moving_frame_drift = rep.moving_frame_drift.max((xm - cel * t - x0).abs()).max((ym - y0).abs());
    }
    Ok(rep)
}

/// Default particle labels and time grid for export: one wave period.
pub fn default_grid(p: &SwellParams) -> (Vec<(f64, f64)>, Vec<f64>) {
    let wavelength = 2.0 * std::f64::consts::PI / p.k;
    let particles = [0.0, 1.0, 2.0, 4.0]
        .iter()
        .flat_map(|&b| (0..8).map(move |i| (i as f64 * wavelength / 8.0, b)))
        .collect();
    let period = 2.0 * std::f64::consts::PI / p.omega.abs().max(f64::MIN_POSITIVE);
    let times = (0..=64).map(|i| i as f64 * period / 64.0).collect();
    (particles, times)
}

/// CSV `t,a,b,x,y,xbar,ybar`, one contiguous block of rows per particle.
pub fn write_csv<W: Write>(p: &SwellParams, particles: &[(f64, f64)], times: &[f64], mut out: W) -> Result<()> {
    p.validate()?;
    writeln!(out, "t,a,b,x,y,xbar,ybar")?;
    let cel = p.celerity();
    for &(a, b) in particles {
        for &t in times {
            let (x, y) = p.position(a, b, t);
            writeln!(out, "{t},{a},{b},{x},{y},{},{y}", x - cel * t)?;
        }
    }
    Ok(())
}

pub fn export_swell_csv(p: &SwellParams, path: &std::path::Path) -> Result<()> {
    let (particles, times) = default_grid(p);
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(p, &particles, &times, &mut w)?;
    w.flush()?;
    Ok(())
}

/// SVG with particle trajectories (circles) and the material line of the
/// surface particles at `t = 0` (a trochoid).
pub fn render_svg(p: &SwellParams) -> Result<String> {
    p.validate()?;
    let (particles, times) = default_grid(p);
    let wavelength = 2.0 * std::f64::consts::PI / p.k;
    let surface: Vec<(f64, f64)> = (0..=400)
        .map(|i| p.position(-0.25 * wavelength + 1.5 * wavelength * i as f64 / 400.0, 0.0, 0.0))
        .collect();
    let mut pts: Vec<(f64, f64)> = surface.clone();
    for &(a, b) in &particles {
        pts.extend(times.iter().map(|&t| p.position(a, b, t)));
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let (width, height, pad) = (900.0, 360.0, 20.0);
    let sx = (width - 2.0 * pad) / (xmax - xmin).max(1e-9);
    let sy = (height - 2.0 * pad) / (ymax - ymin).max(1e-9);
    let s = sx.min(sy);
    let tr = |x: f64, y: f64| (pad + (x - xmin) * s, height - pad - (y - ymin) * s);
    let poly = |path: &[(f64, f64)], style: &str| {
        let coords: Vec<String> = path
            .iter()
            .map(|&(x, y)| {
                let (u, v) = tr(x, y);
                format!("{u:.2},{v:.2}")
            })
            .collect();
        format!("  <polyline fill=\"none\" {style} points=\"{}\"/>\n", coords.join(" "))
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    for &(a, b) in &particles {
        let path: Vec<(f64, f64)> = times.iter().map(|&t| p.position(a, b, t)).collect();
        svg.push_str(&poly(&path, "stroke=\"steelblue\" stroke-width=\"1\""));
    }
    svg.push_str(&poly(&surface, "stroke=\"firebrick\" stroke-width=\"1.5\""));
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Vec<f64>> {
        SampleBox::new(vec![0.0, 0.0, 0.0], vec![20.0, 5.0, 2.0 * std::f64::consts::PI])
            .unwrap()
            .points(64, 7)
    }

    #[test]
    fn incompressible_swell() {
        let rep = swell_check(&SwellParams::default(), &samples()).unwrap();
        assert!(rep.jacobian_drift < 1e-9, "{rep:?}");
        assert!(rep.circle_deviation < 1e-10);
        assert!(rep.moving_frame_drift < 1e-9);
    }

    #[test]
    fn jacobian_value() {
        // J = 1 - k^2 R^2
        let p = SwellParams::default();
        let map = ExprMap::parse_with_vars(&["y1", "y2", "x1"], &p.map_text()).unwrap();
        let j = map.taylor_lift(&[3.0, 1.5, 0.7], 1).unwrap().first_order();
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let r = p.radius(1.5);
        assert!((det - (1.0 - 0.01 * r * r)).abs() < 1e-14);
    }

    #[test]
    fn mismatched_decay_is_compressible() {
        let p = SwellParams {
            k_r: Some(0.3),
            ..Default::default()
        };
        assert!(swell_check(&p, &samples()).unwrap().jacobian_drift > 1e-3);
    }

    #[test]
    fn degenerate_amplitude_and_bad_parameters() {
        let p = SwellParams {
            r0: 0.0,
            ..Default::default()
        };
        let rep = swell_check(&p, &samples()).unwrap();
        assert_eq!((rep.jacobian_drift, rep.circle_deviation), (0.0, 0.0));
        let bad = SwellParams {
            k: 0.0,
            ..Default::default()
        };
        assert!(matches!(swell_check(&bad, &samples()), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn family_is_incompressible_through_speed() {
        let bounds = SampleBox::new(vec![0.0, 0.0, 0.0], vec![20.0, 5.0, 6.0]).unwrap();
        let fam = swell_family(&SwellParams::default(), bounds).unwrap();
        let pts = fam.samples(8, 1);
        let s = fam.generalized_speed(&pts[0][..2], &pts[0][2..]).unwrap();
        assert!(s.delta > 0.0);
        assert!(fam.mass_conservation_residual(&pts).unwrap() < 1e-10);
    }

    #[test]
    fn csv_rows_lie_on_circles() {
        let p = SwellParams::default();
        let (particles, times) = default_grid(&p);
        let mut buf = Vec::new();
        write_csv(&p, &particles, &times, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,a,b,x,y,xbar,ybar"));
        let mut rows = 0;
        for l in lines {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            let r = (v[3] - v[1]).hypot(v[4] - v[2]);
            assert!((r - p.radius(v[2])).abs() < 1e-10);
            rows += 1;
        }
        assert_eq!(rows, particles.len() * times.len());
        let svg = render_svg(&p).unwrap();
        assert!(svg.starts_with("<svg") && svg.matches("<polyline").count() == particles.len() + 1);
    }

    #[test]
    fn csv_to_bad_path_fails() {
        let err = export_swell_csv(&SwellParams::default(), std::path::Path::new("/nonexistent/dir/out.csv"));
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
