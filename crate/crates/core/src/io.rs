//! File formats and argument grammars: angle JSON, curve specifications,
//! step sweeps, and SVG drawings.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{AngleFunction, AngleVector, ClosedCurve, Perturbed, Point};
use crate::smoothing::{project_to_closed, SampledAngle, Tabulated};

/// `{"thetas": [...]}`.
pub fn angles_from_json(text: &str) -> Result<AngleVector> {
    Ok(serde_json::from_str(text)?)
}

pub fn angles_to_json(a: &AngleVector) -> Result<String> {
    Ok(serde_json::to_string(a)?)
}

/// A limit curve named on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveSpec {
    Circle,
    Perturbed { amplitude: f64, mode: u32 },
    File(String),
}

impl CurveSpec {
    /// `circle`, `perturbed:a=<r>,m=<k>` or `file:<path>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "circle" {
            return Ok(CurveSpec::Circle);
        }
        if let Some(rest) = text.strip_prefix("perturbed:") {
            let (amplitude, mode) = parse_perturbation(rest)?;
            return Ok(CurveSpec::Perturbed { amplitude, mode });
        }
        if let Some(path) = text.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::Parse("empty file path".into()));
            }
            return Ok(CurveSpec::File(path.to_string()));
        }
        Err(Error::Parse(format!("unknown curve '{text}'")))
    }

    /// Builds the closed curve; perturbed and file curves go through the
    /// two-bump closure projection.
    pub fn build(&self) -> Result<ClosedCurve> {
        match self {
            CurveSpec::Circle => Ok(ClosedCurve::circle()),
            CurveSpec::Perturbed { amplitude, mode } => {
                project_to_closed(Arc::new(Perturbed { amplitude: *amplitude, mode: *mode }))
            }
            CurveSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                project_to_closed(angle_from_csv(&text)?)
            }
        }
    }
}

/// `a=<r>,m=<k>` in either order.
pub fn parse_perturbation(text: &str) -> Result<(f64, u32)> {
    let mut amplitude = None;
    let mut mode = None;
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got '{part}'")))?;
        match key.trim() {
            "a" => {
                amplitude = Some(value.trim().parse::<f64>().map_err(|e| Error::Parse(format!("a: {e}")))?)
            }
            "m" => mode = Some(value.trim().parse::<u32>().map_err(|e| Error::Parse(format!("m: {e}")))?),
            other => return Err(Error::Parse(format!("unknown key '{other}'"))),
        }
    }
    match (amplitude, mode) {
        (Some(a), Some(m)) if a.is_finite() && m >= 1 => Ok((a, m)),
        (Some(_), Some(_)) => Err(Error::Parse("need a finite amplitude and m >= 1".into())),
        _ => Err(Error::Parse("need both a and m".into())),
    }
}

/// Sampled `s,theta` CSV as an angle function: a C2 spline when the grid
/// is uniform, piecewise linear otherwise.
pub fn angle_from_csv(text: &str) -> Result<Arc<dyn AngleFunction>> {
    let table = Tabulated::from_csv(text)?;
    let (s, theta) = table.knots();
    let m = s.len() - 1;
    let uniform = m >= 4 && s.iter().enumerate().all(|(k, x)| (x - k as f64 / m as f64).abs() < 1e-12);
    if uniform {
        Ok(Arc::new(SampledAngle::from_samples(theta)?))
    } else {
        Ok(Arc::new(table))
    }
}

/// Rows `s,theta` of any angle function at `m + 1` uniform points.
pub fn angle_to_csv(f: &dyn AngleFunction, m: usize) -> String {
    let mut out = String::from("s,theta\n");
    for k in 0..=m {
        let s = k as f64 / m as f64;
        let _ = writeln!(out, "{:.16e},{:.16e}", s, f.theta(s));
    }
    out
}

/// `1/N` or the halving sweep `1/A..1/B` with `B = A 2^k`.
pub fn parse_eps(text: &str) -> Result<Vec<f64>> {
    let recip = |t: &str| -> Result<u64> {
        let t = t.trim();
        let denom = t
            .strip_prefix("1/")
            .ok_or_else(|| Error::Parse(format!("step must be written 1/N, got '{t}'")))?;
        let n: u64 = denom.parse().map_err(|e| Error::Parse(format!("'{t}': {e}")))?;
        if n < 3 {
            return Err(Error::Parse(format!("need N >= 3, got {n}")));
        }
        Ok(n)
    };
    match text.split_once("..") {
        None => Ok(vec![1.0 / recip(text)? as f64]),
        Some((a, b)) => {
            let (lo, hi) = (recip(a)?, recip(b)?);
            if hi < lo || hi % lo != 0 || !(hi / lo).is_power_of_two() {
                return Err(Error::Parse(format!("sweep 1/{lo}..1/{hi} is not a halving sequence")));
            }
            let mut out = Vec::new();
            let mut n = lo;
            while n <= hi {
                out.push(1.0 / n as f64);
                n *= 2;
            }
            Ok(out)
        }
    }
}

/// Something to draw.
#[derive(Clone, Copy, Debug)]
pub enum Shape<'a> {
    /// Closed polygon; vertices are marked.
    Polygon(&'a [Point]),
    Curve(&'a ClosedCurve),
}

pub const SVG_SIZE: f64 = 400.0;
const SVG_MARGIN: f64 = 20.0;
const CURVE_SAMPLES: usize = 512;

/// Standalone SVG with every shape drawn in a common 400 x 400 viewport.
pub fn svg_document(shapes: &[Shape<'_>]) -> Result<String> {
    if shapes.is_empty() {
        return Err(Error::Argument("nothing to draw".into()));
    }
    let mut paths: Vec<(Vec<Point>, bool)> = Vec::new();
    for shape in shapes {
        match shape {
            Shape::Polygon(points) => {
                if points.is_empty() {
                    return Err(Error::Argument("empty chain".into()));
                }
                paths.push((points.to_vec(), true));
            }
            Shape::Curve(c) => {
                let pts = (0..CURVE_SAMPLES).map(|k| c.position(k as f64 / CURVE_SAMPLES as f64)).collect();
                paths.push((pts, false));
            }
        }
    }
    let all = paths.iter().flat_map(|(p, _)| p.iter());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / span;
    let cx = 0.5 * (x0 + x1);
    let cy = 0.5 * (y0 + y1);
    let map = |p: &Point| {
        (
            0.5 * SVG_SIZE + scale * (p.x - cx),
            0.5 * SVG_SIZE - scale * (p.y - cy),
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SVG_SIZE
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (points, marked) in &paths {
        let mut d = String::new();
        for (i, p) in points.iter().enumerate() {
            let (x, y) = map(p);
            let _ = write!(d, "{}{:.3},{:.3} ", if i == 0 { "M" } else { "L" }, x, y);
        }
        d.push('Z');
        let stroke = if *marked { "black" } else { "steelblue" };
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#);
        if *marked {
            for p in points {
                let (x, y) = map(p);
                let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="crimson"/>"#);
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(shapes: &[Shape<'_>], path: &Path) -> Result<()> {
    let doc = svg_document(shapes)?;
    std::fs::write(path, doc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chain_from_angles, regular_polygon};

    #[test]
    fn angle_json_round_trip() {
        let a = regular_polygon(6).unwrap();
        let text = angles_to_json(&a).unwrap();
        assert!(text.starts_with("{\"thetas\":["));
        assert_eq!(angles_from_json(&text).unwrap(), a);
        assert!(angles_from_json("{\"angles\": []}").is_err());
    }

    #[test]
    fn curve_specs() {
        assert_eq!(CurveSpec::parse("circle").unwrap(), CurveSpec::Circle);
        assert_eq!(
            CurveSpec::parse("perturbed:a=0.2,m=2").unwrap(),
            CurveSpec::Perturbed { amplitude: 0.2, mode: 2 }
        );
        assert_eq!(
            CurveSpec::parse("perturbed:m=3,a=-0.1").unwrap(),
            CurveSpec::Perturbed { amplitude: -0.1, mode: 3 }
        );
        assert_eq!(CurveSpec::parse("file:x.csv").unwrap(), CurveSpec::File("x.csv".into()));
        for bad in ["square", "perturbed:a=0.2", "perturbed:a=x,m=2", "file:", "perturbed:a=0.1,m=0"] {
            assert!(CurveSpec::parse(bad).is_err(), "{bad}");
        }
        let c = CurveSpec::parse("perturbed:a=0.2,m=2").unwrap().build().unwrap();
        let (x, y) = c.closure_integrals();
        assert!(x.abs() < 1e-8 && y.abs() < 1e-8);
    }

    #[test]
    fn file_curve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theta.csv");
        std::fs::write(&path, angle_to_csv(&Perturbed { amplitude: 0.1, mode: 3 }, 1024)).unwrap();
        let spec = CurveSpec::parse(&format!("file:{}", path.display())).unwrap();
        let c = spec.build().unwrap();
        assert_eq!(c.smoothness(), crate::geometry::Smoothness::C2);
        let f = angle_from_csv("s,theta\n0,0\n0.3,2\n1,6.283185307179586\n").unwrap();
        assert_eq!(f.smoothness(), crate::geometry::Smoothness::H1);
    }

    #[test]
    fn eps_grammar() {
        assert_eq!(parse_eps("1/8").unwrap(), vec![0.125]);
        assert_eq!(parse_eps("1/8..1/64").unwrap(), vec![0.125, 0.0625, 0.03125, 0.015625]);
        for bad in ["0.125", "1/2", "1/8..1/48", "1/16..1/8", "1/x", "2/8"] {
            assert!(parse_eps(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn octagon_svg() {
        let c = chain_from_angles(&regular_polygon(8).unwrap(), 0.125, Point::ORIGIN).unwrap();
        let doc = svg_document(&[Shape::Polygon(c.points())]).unwrap();
        assert_eq!(doc.matches("<circle").count(), 8);
        assert_eq!(doc.matches("<path").count(), 1);
        assert!(doc.starts_with("<svg"));
    }

    #[test]
    fn overlay_svg() {
        let curve = ClosedCurve::circle();
        let c = chain_from_angles(&regular_polygon(8).unwrap(), 0.125, Point::ORIGIN).unwrap();
        let doc = svg_document(&[Shape::Curve(&curve), Shape::Polygon(c.points())]).unwrap();
        assert_eq!(doc.matches("<path").count(), 2);
    }

    #[test]
    fn empty_chain_svg() {
        assert!(matches!(svg_document(&[Shape::Polygon(&[])]), Err(Error::Argument(_))));
        assert!(matches!(svg_document(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn unwritable_svg() {
        let c = chain_from_angles(&regular_polygon(4).unwrap(), 0.25, Point::ORIGIN).unwrap();
        let err = emit_svg(&[Shape::Polygon(c.points())], Path::new("/nonexistent/dir/x.svg"));
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
