//! Plain-text track files.
//!
//! ```text
//! tvp/1
//! K fx fy cx cy
//! S sigma                      (optional, pixel noise std, default 1)
//! P id u0 v0 u1 v1 u2 v2
//! L id x0a y0a x0b y0b x1a y1a x1b y1b x2a y2a x2b y2b
//! ```
//!
//! A frame in which a point is not observed is written `nan nan`. Blank lines
//! and lines starting with `#` are ignored. Numbers are written in the
//! shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::geometry::{CameraIntrinsics, PixelPoint};
use crate::scene::ThreeViewScene;
use crate::tracks::{LineTrack, PointTrack};
use crate::{Error, Result};

pub const HEADER: &str = "tvp/1";
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Turn malformed or unusable records into errors instead of warnings.
    pub strict: bool,
    /// Noise std used when the file has no `S` record.
    pub default_sigma: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            strict: false,
            default_sigma: DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFile {
    pub intrinsics: Option<CameraIntrinsics>,
    pub sigma: f64,
    pub points: Vec<PointTrack>,
    pub lines: Vec<LineTrack>,
    pub warnings: Vec<Warning>,
}

fn numbers(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| Error::TrackFormat {
                line,
                message: format!("`{f}` is not a number"),
            })
        })
        .collect()
}

fn expect_len(fields: &[&str], n: usize, what: &str, line: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::TrackFormat {
            line,
            message: format!("{what} record needs {} values, found {}", n - 1, fields.len() - 1),
        });
    }
    Ok(())
}

fn parse_id(s: &str, line: usize) -> Result<u64> {
    s.parse().map_err(|_| Error::TrackFormat {
        line,
        message: format!("`{s}` is not a track id"),
    })
}

fn pixel(v: &[f64]) -> Option<PixelPoint> {
    let p = PixelPoint::new(v[0], v[1]);
    p.is_finite().then_some(p)
}

pub fn read_tracks(reader: impl BufRead, opts: &IngestOptions) -> Result<TrackFile> {
    let mut out = TrackFile {
        intrinsics: None,
        sigma: opts.default_sigma,
        points: Vec::new(),
        lines: Vec::new(),
        warnings: Vec::new(),
    };
    let mut seen_header = false;

    for (idx, text) in reader.lines().enumerate() {
        let line = idx + 1;
        let text = text?;
        let text = text.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if !seen_header {
            if text != HEADER {
                return Err(Error::TrackFormat {
                    line,
                    message: format!("expected header `{HEADER}`"),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        match fields[0] {
            "K" => {
                expect_len(&fields, 5, "K", line)?;
                let v = numbers(&fields[1..], line)?;
                let k = CameraIntrinsics::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::TrackFormat {
                    line,
                    message: e.to_string(),
                })?;
                out.intrinsics = Some(k);
            }
            "S" => {
                expect_len(&fields, 2, "S", line)?;
                let s = numbers(&fields[1..], line)?[0];
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::TrackFormat {
                        line,
                        message: "noise std must be finite and non-negative".into(),
                    });
                }
                out.sigma = s;
            }
            kind @ ("P" | "L") => {
                let Some(k) = out.intrinsics else {
                    return Err(Error::TrackFormat {
                        line,
                        message: "track record before the K record".into(),
                    });
                };
                let parsed = if kind == "P" {
                    parse_point(&fields, line, &k, out.sigma).map(|t| out.points.push(t))
                } else {
                    parse_line(&fields, line, &k, out.sigma).map(|t| out.lines.push(t))
                };
                if let Err(e) = parsed {
                    if opts.strict {
                        return Err(e);
                    }
                    let message = match e {
                        Error::TrackFormat { message, .. } => message,
                        other => other.to_string(),
                    };
                    out.warnings.push(Warning { line, message });
                }
            }
            other => {
                let e = Error::TrackFormat {
                    line,
                    message: format!("unknown record type `{other}`"),
                };
                if opts.strict {
                    return Err(e);
                }
                out.warnings.push(Warning {
                    line,
                    message: format!("unknown record type `{other}`"),
                });
            }
        }
    }
    Ok(out)
}

fn parse_point(fields: &[&str], line: usize, k: &CameraIntrinsics, sigma: f64) -> Result<PointTrack> {
    expect_len(fields, 8, "P", line)?;
    let id = parse_id(fields[1], line)?;
    let v = numbers(&fields[2..], line)?;
    let pixels = [pixel(&v[0..2]), pixel(&v[2..4]), pixel(&v[4..6])];
    PointTrack::isotropic(id, k, pixels, sigma).map_err(|e| Error::TrackFormat {
        line,
        message: e.to_string(),
    })
}

fn parse_line(fields: &[&str], line: usize, k: &CameraIntrinsics, sigma: f64) -> Result<LineTrack> {
    expect_len(fields, 14, "L", line)?;
    let id = parse_id(fields[1], line)?;
    let v = numbers(&fields[2..], line)?;
    let mut ends = [[PixelPoint::new(0.0, 0.0); 2]; 3];
    for (f, seg) in ends.iter_mut().enumerate() {
        for (e, p) in seg.iter_mut().enumerate() {
            let o = 4 * f + 2 * e;
            *p = pixel(&v[o..o + 2]).ok_or_else(|| Error::TrackFormat {
                line,
                message: format!("line track {id} is missing frame {f}"),
            })?;
        }
    }
    LineTrack::from_endpoints(id, k, ends, sigma).map_err(|e| Error::TrackFormat {
        line,
        message: e.to_string(),
    })
}

fn push_pixel(s: &mut String, p: Option<PixelPoint>) {
    match p {
        Some(p) => write!(s, " {} {}", p.u, p.v).unwrap(),
        None => s.push_str(" nan nan"),
    }
}

/// Serializes tracks; `sigma` is written as the `S` record when given.
pub fn format_tracks(k: &CameraIntrinsics, sigma: Option<f64>, points: &[PointTrack], lines: &[LineTrack]) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "K {} {} {} {}", k.fx, k.fy, k.cx, k.cy).unwrap();
    if let Some(sigma) = sigma {
        writeln!(s, "S {sigma}").unwrap();
    }
    for t in points {
        write!(s, "P {}", t.id).unwrap();
        for p in t.pixels() {
            push_pixel(&mut s, p);
        }
        s.push('\n');
    }
    for t in lines {
        write!(s, "L {}", t.id).unwrap();
        for seg in t.endpoints() {
            for p in seg {
                push_pixel(&mut s, Some(p));
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_tracks(
    mut w: impl Write,
    k: &CameraIntrinsics,
    sigma: Option<f64>,
    points: &[PointTrack],
    lines: &[LineTrack],
) -> Result<()> {
    w.write_all(format_tracks(k, sigma, points, lines).as_bytes())?;
    Ok(())
}

/// Track file of a synthetic scene, carrying its noise level.
pub fn format_scene(scene: &ThreeViewScene) -> String {
    format_tracks(
        &scene.intrinsics,
        Some(scene.config.noise_std),
        &scene.point_tracks,
        &scene.line_tracks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, ScenarioConfig};

    fn read(s: &str) -> Result<TrackFile> {
        read_tracks(s.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn empty_file_is_empty() {
        let f = read("").unwrap();
        assert!(f.points.is_empty() && f.lines.is_empty() && f.warnings.is_empty());
        assert!(f.intrinsics.is_none());
    }

    #[test]
    fn round_trip_is_exact() {
        let s = generate_scene(&ScenarioConfig {
            noise_std: 0.7,
            rng_seed: 3,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let f = read(&format_scene(&s)).unwrap();
        assert_eq!(f.points, s.point_tracks);
        assert_eq!(f.lines, s.line_tracks);
        assert_eq!(f.intrinsics, Some(s.intrinsics));
        assert_eq!(f.sigma, 0.7);
    }

    #[test]
    fn missing_frames_are_written_as_nan() {
        let k = CameraIntrinsics::from_focal(500.0).unwrap();
        let p = Some(PixelPoint::new(1.5, -2.25));
        let t = PointTrack::isotropic(4, &k, [p, p, None], 1.0).unwrap();
        let text = format_tracks(&k, None, &[t.clone()], &[]);
        assert!(text.contains("P 4 1.5 -2.25 1.5 -2.25 nan nan"));
        assert_eq!(read(&text).unwrap().points, vec![t]);
    }

    #[test]
    fn one_bad_record_among_hundred() {
        let s = generate_scene(&ScenarioConfig {
            n_points: 100,
            n_lines: 0,
            noise_std: 1.0,
            rng_seed: 1,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let text = format_scene(&s);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // header, K, S, then the records
        lines[3 + 41] = "P 41 1.0 2.0 oops 4.0 5.0 6.0".into();
        let f = read(&lines.join("\n")).unwrap();
        assert_eq!(f.points.len(), 99);
        assert_eq!(f.warnings.len(), 1);
        assert_eq!(f.warnings[0].line, 45);

        let strict = read_tracks(lines.join("\n").as_bytes(), &IngestOptions { strict: true, ..Default::default() });
        assert!(matches!(strict, Err(Error::TrackFormat { line: 45, .. })));
    }

    #[test]
    fn single_frame_point_is_skipped_with_warning() {
        let text = "tvp/1\nK 800 800 0 0\nP 0 1 2 nan nan nan nan\nP 1 1 2 3 4 nan nan\n";
        let f = read(text).unwrap();
        assert_eq!(f.points.len(), 1);
        assert_eq!(f.warnings.len(), 1);
        assert_eq!(f.warnings[0].line, 3);
        assert_eq!(f.sigma, DEFAULT_SIGMA);
    }

    #[test]
    fn header_and_intrinsics_errors_carry_line_numbers() {
        assert!(matches!(read("tvp/2\n"), Err(Error::TrackFormat { line: 1, .. })));
        assert!(matches!(read("# c\ntvp/1\nK 800 x 0 0\n"), Err(Error::TrackFormat { line: 3, .. })));
        assert!(matches!(read("tvp/1\nK -1 800 0 0\n"), Err(Error::TrackFormat { line: 2, .. })));
        assert!(matches!(read("tvp/1\nP 0 1 2 3 4 5 6\n"), Err(Error::TrackFormat { line: 2, .. })));
    }
}
