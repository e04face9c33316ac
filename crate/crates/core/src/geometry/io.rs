//! Plain-text profile tables.
//!
//! ```text
//! # r0=0.1 L=1 M=100 W=1 H=0.5
//! 0.000000000000e0 0.000000000000e0
//! ...
//! ```
//!
//! One `abscissa value` pair per line; blank lines and further `#` lines are
//! ignored.

use std::fmt::Write as _;

use super::{BoundaryProfile, GeometryError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileHeader {
    pub r0: f64,
    pub lipschitz: f64,
    pub area_bound: f64,
    pub width: f64,
    pub height: f64,
}

pub fn write_profile(profile: &BoundaryProfile, header: &ProfileHeader) -> String {
    let mut out = format!(
        "# r0={} L={} M={} W={} H={}\n",
        header.r0, header.lipschitz, header.area_bound, header.width, header.height
    );
    for (x, v) in profile.knots().iter().zip(profile.values()) {
        let _ = writeln!(out, "{x:.15e} {v:.15e}");
    }
    out
}

pub fn read_profile(text: &str) -> Result<(ProfileHeader, BoundaryProfile), GeometryError> {
    let mut header = None;
    let mut knots = Vec::new();
    let mut values = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = k + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() && rest.contains("r0=") {
                header = Some(parse_header(rest, lineno)?);
            }
            continue;
        }
        let mut it = line.split_whitespace().map(|t| {
            t.parse::<f64>().map_err(|e| GeometryError::ProfileParse {
                line: lineno,
                message: format!("bad number {t:?}: {e}"),
            })
        });
        match (it.next(), it.next(), it.next()) {
            (Some(x), Some(v), None) => {
                knots.push(x?);
                values.push(v?);
            }
            _ => {
                return Err(GeometryError::ProfileParse {
                    line: lineno,
                    message: "expected two columns: abscissa value".into(),
                })
            }
        }
    }
    let header = header.ok_or(GeometryError::ProfileParse {
        line: 1,
        message: "missing header `# r0=.. L=.. M=.. W=.. H=..`".into(),
    })?;
    Ok((header, BoundaryProfile::new(knots, values)?))
}

fn parse_header(rest: &str, line: usize) -> Result<ProfileHeader, GeometryError> {
    let get = |key: &str| -> Result<f64, GeometryError> {
        rest.split_whitespace()
            .filter_map(|tok| tok.split_once('='))
            .find(|(k, _)| *k == key)
            .ok_or_else(|| GeometryError::ProfileParse {
                line,
                message: format!("header is missing {key}="),
            })?
            .1
            .parse::<f64>()
            .map_err(|e| GeometryError::ProfileParse {
                line,
                message: format!("header field {key}: {e}"),
            })
    };
    Ok(ProfileHeader {
        r0: get("r0")?,
        lipschitz: get("L")?,
        area_bound: get("M")?,
        width: get("W")?,
        height: get("H")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = BoundaryProfile::from_fn(1.0, 40, |x| 0.01 * (3.0 * x).sin());
        let h = ProfileHeader {
            r0: 0.1,
            lipschitz: 1.0,
            area_bound: 100.0,
            width: 1.0,
            height: 0.5,
        };
        let (h2, p2) = read_profile(&write_profile(&p, &h)).unwrap();
        assert_eq!(h, h2);
        assert_eq!(p.knots(), p2.knots());
        for (a, b) in p.values().iter().zip(p2.values()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn reports_line_numbers() {
        let text = "# r0=0.1 L=1 M=100 W=1 H=0.5\n0 0\n0.5 zz\n";
        match read_profile(text) {
            Err(GeometryError::ProfileParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_profile("0 0\n1 0\n").is_err());
    }
}
