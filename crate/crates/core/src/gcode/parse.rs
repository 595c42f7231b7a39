use std::fmt::Write as _;

use super::{GSegment, MoveKind};
use crate::error::GcodeError;
use crate::machine::Pose;

fn mm_to_m(v: f64) -> f64 {
    v / 1000.0
}

fn deg_to_rad(v: f64) -> f64 {
    v.to_radians()
}

fn mm_per_min_to_m_per_s(v: f64) -> f64 {
    v / 60_000.0
}

/// Splits a line into `(letter, number text)` words, dropping comments.
fn words(line: &str, line_no: usize) -> Result<Vec<(char, String)>, GcodeError> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => break,
            '(' => {
                for c in chars.by_ref() {
                    if c == ')' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {}
            c if c.is_ascii_alphabetic() => {
                while chars.peek().is_some_and(|c| *c == ' ' || *c == '\t') {
                    chars.next();
                }
                let mut num = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' || d == '+' || d == '-' {
                        num.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((c.to_ascii_uppercase(), num));
            }
            other => {
                return Err(GcodeError::MalformedWord {
                    line: line_no,
                    word: other.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Parses G0/G1 moves, starting from the all-zero pose.
pub fn parse_gcode(text: &str) -> Result<Vec<GSegment>, GcodeError> {
    parse_gcode_from(text, &Pose::default())
}

/// Parses G0/G1 moves. Coordinates not given on a line keep their previous
/// value, starting from `start`. Units: X/Y/Z in mm, A/B in degrees, F in
/// mm/min.
pub fn parse_gcode_from(text: &str, start: &Pose) -> Result<Vec<GSegment>, GcodeError> {
    let mut segments = Vec::new();
    let mut mode: Option<MoveKind> = None;
    let mut feed: Option<f64> = None;
    let mut pose = *start;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut moved = false;
        let mut seen = [false; 6];
        for (letter, num) in words(line, line_no)? {
            let word = || format!("{letter}{num}");
            let value: f64 = num.parse().map_err(|_| GcodeError::MalformedWord {
                line: line_no,
                word: word(),
            })?;
            if !value.is_finite() {
                return Err(GcodeError::MalformedWord {
                    line: line_no,
                    word: word(),
                });
            }
            let slot = match letter {
                'G' => {
                    mode = Some(match value {
                        v if v == 0.0 && !num.contains('.') => MoveKind::Rapid,
                        v if v == 1.0 && !num.contains('.') => MoveKind::Feed,
                        _ => {
                            return Err(GcodeError::UnsupportedCode {
                                line: line_no,
                                code: word(),
                            })
                        }
                    });
                    continue;
                }
                'N' => continue,
                'X' => 0,
                'Y' => 1,
                'Z' => 2,
                'A' => 3,
                'B' => 4,
                'F' => 5,
                _ => {
                    return Err(GcodeError::UnsupportedCode {
                        line: line_no,
                        code: word(),
                    })
                }
            };
            if seen[slot] {
                return Err(GcodeError::MalformedWord {
                    line: line_no,
                    word: word(),
                });
            }
            seen[slot] = true;
            match slot {
                0 => pose.x = mm_to_m(value),
                1 => pose.y = mm_to_m(value),
                2 => pose.z = mm_to_m(value),
                3 => pose.alpha = deg_to_rad(value),
                4 => pose.beta = deg_to_rad(value),
                _ => {
                    if value <= 0.0 {
                        return Err(GcodeError::NonPositiveFeed { line: line_no });
                    }
                    feed = Some(mm_per_min_to_m_per_s(value));
                }
            }
            moved |= slot < 5;
        }
        if !moved {
            continue;
        }
        let segment = match mode {
            None => return Err(GcodeError::NoMotionMode { line: line_no }),
            Some(MoveKind::Rapid) => GSegment {
                kind: MoveKind::Rapid,
                target: pose,
                feed: None,
            },
            Some(MoveKind::Feed) => GSegment {
                kind: MoveKind::Feed,
                target: pose,
                feed: Some(feed.ok_or(GcodeError::MissingFeed { line: line_no })?),
            },
        };
        segments.push(segment);
    }
    Ok(segments)
}

/// A value `x` with `convert(x) == target`, searched a few units in the last
/// place around `guess`.
fn preimage(target: f64, guess: f64, convert: fn(f64) -> f64) -> f64 {
    if convert(guess) == target {
        return guess;
    }
    let (mut up, mut down) = (guess, guess);
    for _ in 0..64 {
        up = up.next_up();
        down = down.next_down();
        for c in [down, up] {
            if convert(c) == target {
                return c;
            }
        }
    }
    guess
}

/// Writes segments back as G-code that parses to the same segments. Every
/// line carries all five coordinates.
pub fn to_gcode(segments: &[GSegment]) -> String {
    let mut out = String::new();
    for s in segments {
        let p = &s.target;
        let code = match s.kind {
            MoveKind::Rapid => "G0",
            MoveKind::Feed => "G1",
        };
        let _ = write!(
            out,
            "{code} X{} Y{} Z{} A{} B{}",
            preimage(p.x, p.x * 1000.0, mm_to_m),
            preimage(p.y, p.y * 1000.0, mm_to_m),
            preimage(p.z, p.z * 1000.0, mm_to_m),
            preimage(p.alpha, p.alpha.to_degrees(), deg_to_rad),
            preimage(p.beta, p.beta.to_degrees(), deg_to_rad),
        );
        if let Some(f) = s.feed {
            let _ = write!(
                out,
                " F{}",
                preimage(f, f * 60_000.0, mm_per_min_to_m_per_s)
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feed_move_with_unit_conversion() {
        let s = parse_gcode("G01 X10 Y0 Z-72 F600").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].kind, MoveKind::Feed);
        assert_eq!(s[0].target, Pose::new(0.0, 0.0, 0.01, 0.0, -0.072));
        assert_eq!(s[0].feed, Some(0.01));
    }

    #[test]
    fn arcs_are_unsupported() {
        assert_eq!(
            parse_gcode("G02 X1 Y1"),
            Err(GcodeError::UnsupportedCode {
                line: 1,
                code: "G02".into()
            })
        );
        assert!(matches!(
            parse_gcode("G1 X1 F100\nM3"),
            Err(GcodeError::UnsupportedCode { line: 2, .. })
        ));
        assert!(matches!(
            parse_gcode("G0 X1\nG1.5 X2"),
            Err(GcodeError::UnsupportedCode { line: 2, .. })
        ));
    }

    #[test]
    fn modal_mode_and_sticky_coordinates() {
        let s = parse_gcode("G1 X5 F100\nY5").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].kind, MoveKind::Feed);
        assert_eq!(s[1].target.x, 0.005);
        assert_eq!(s[1].target.y, 0.005);
        assert_eq!(s[1].feed, s[0].feed);
    }

    #[test]
    fn comments_case_and_orientation_words() {
        let text = "(header)\n g0 x1 (inline) y2 ; trailing\n;only comment\nG1 A20 b-10 f1200";
        let s = parse_gcode(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].kind, MoveKind::Rapid);
        assert_eq!(s[0].feed, None);
        assert_eq!(
            (s[1].target.alpha, s[1].target.beta),
            (20f64.to_radians(), (-10f64).to_radians())
        );
        assert_eq!(s[1].target.x, 0.001);
        assert_eq!(s[1].feed, Some(0.02));
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_gcode("G1 X1"),
            Err(GcodeError::MissingFeed { line: 1 })
        );
        assert_eq!(
            parse_gcode("G1 X1 F0"),
            Err(GcodeError::NonPositiveFeed { line: 1 })
        );
        assert_eq!(parse_gcode("X1"), Err(GcodeError::NoMotionMode { line: 1 }));
        assert!(matches!(
            parse_gcode("G1 X F10"),
            Err(GcodeError::MalformedWord { .. })
        ));
        assert!(matches!(
            parse_gcode("G1 X1 X2 F10"),
            Err(GcodeError::MalformedWord { .. })
        ));
        assert!(matches!(
            parse_gcode("G1 X1.2.3 F10"),
            Err(GcodeError::MalformedWord { .. })
        ));
        assert!(matches!(
            parse_gcode("G1 X1 F10 #"),
            Err(GcodeError::MalformedWord { .. })
        ));
    }

    #[test]
    fn empty_and_mode_only_lines() {
        assert!(parse_gcode("").unwrap().is_empty());
        assert!(parse_gcode("G1 F100\nG0").unwrap().is_empty());
    }

    #[test]
    fn parse_from_start_pose() {
        let start = Pose::new(0.0, 0.0, 0.0, 0.0, -0.072);
        let s = parse_gcode_from("G0 X10", &start).unwrap();
        assert_eq!(s[0].target, Pose::new(0.0, 0.0, 0.01, 0.0, -0.072));
    }

    fn number() -> impl Strategy<Value = String> {
        (-99_999i64..99_999, 0u32..6).prop_map(|(m, d)| {
            let v = m as f64 / 10f64.powi(d as i32);
            format!("{v}")
        })
    }

    fn line() -> impl Strategy<Value = String> {
        (
            prop::bool::ANY,
            prop::option::of(number()),
            prop::option::of(number()),
            prop::option::of(number()),
            prop::option::of(number()),
            prop::option::of(number()),
            1u32..100_000,
        )
            .prop_map(|(rapid, x, y, z, a, b, f)| {
                let mut s = String::from(if rapid { "G0" } else { "G1" });
                for (k, v) in [('X', x), ('Y', y), ('Z', z), ('A', a), ('B', b)] {
                    if let Some(v) = v {
                        s.push_str(&format!(" {k}{v}"));
                    }
                }
                if !rapid {
                    s.push_str(&format!(" F{}", f as f64 / 7.0));
                }
                s
            })
    }

    proptest! {
        #[test]
        fn serialize_round_trip(lines in prop::collection::vec(line(), 0..12)) {
            let text = lines.join("\n");
            let parsed = parse_gcode(&text).unwrap();
            let again = parse_gcode(&to_gcode(&parsed)).unwrap();
            prop_assert_eq!(parsed, again);
        }
    }
}
