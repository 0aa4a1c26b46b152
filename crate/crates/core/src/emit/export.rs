use std::io::Write;

use chrono::DateTime;

use super::{EmitError, TsbFile};
use crate::time::format_timestamp;

/// `v` rounded to `digits` significant digits in the shortest plain or
/// exponent form, trailing zeros removed.
pub fn format_significant(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

/// Writes the selected channels as CSV: `timestamp_utc` then one column per
/// channel, 9 significant digits.
pub fn export_csv<W: Write, S: AsRef<str>>(file: &TsbFile, selection: &[S], writer: W) -> Result<(), EmitError> {
    if selection.is_empty() {
        return Err(EmitError::EmptySelection);
    }
    let cols = selection
        .iter()
        .map(|s| {
            file.channel_index(s.as_ref()).ok_or_else(|| EmitError::UnknownChannel {
                name: s.as_ref().to_string(),
                available: file.channels.iter().map(|c| c.name.clone()).collect(),
            })
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| EmitError::Io(std::io::Error::other(e));
    let mut header = vec!["timestamp_utc".to_string()];
    header.extend(selection.iter().map(|s| s.as_ref().to_string()));
    w.write_record(&header).map_err(io)?;
    for f in &file.frames {
        let t = i64::try_from(f.timestamp_us)
            .ok()
            .and_then(DateTime::from_timestamp_micros)
            .ok_or_else(|| EmitError::InvalidInput(format!("timestamp {} us is out of range", f.timestamp_us)))?;
        let mut row = vec![format_timestamp(&t)];
        row.extend(cols.iter().map(|&c| format_significant(f.values[c], 9)));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::{TsbChannel, TsbFrame, Unit};
    use proptest::prelude::*;

    fn file() -> TsbFile {
        TsbFile {
            channels: vec![
                TsbChannel { name: "bus_1_vm".into(), unit: Unit::PerUnit },
                TsbChannel { name: "odd,name".into(), unit: Unit::Megawatt },
            ],
            frames: (0..3)
                .map(|i| TsbFrame {
                    timestamp_us: 1_467_381_600_000_000 + 15_000_000 * i,
                    values: vec![1.0 / 3.0 + i as f64, 12345.678912345],
                })
                .collect(),
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_significant(12345.678912345, 9), "12345.6789");
        assert_eq!(format_significant(-2.5, 9), "-2.5");
        assert_eq!(format_significant(1.23456789012e-9, 9), "1.23456789e-9");
        assert_eq!(format_significant(9.9999999999, 9), "10");
        assert_eq!(format_significant(0.0, 9), "0");
    }

    #[test]
    fn layout_and_quoting() {
        let mut buf = Vec::new();
        export_csv(&file(), &["bus_1_vm", "odd,name"], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "timestamp_utc,bus_1_vm,\"odd,name\"");
        assert_eq!(lines[1], "2016-07-01T14:00:00Z,0.333333333,12345.6789");
    }

    #[test]
    fn selection_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(export_csv(&file(), &empty, Vec::new()), Err(EmitError::EmptySelection)));
        let err = export_csv(&file(), &["nope"], Vec::new()).unwrap_err();
        assert!(err.to_string().contains("bus_1_vm, odd,name"), "{err}");
    }

    proptest! {
        #[test]
        fn parse_back_within_half_unit(v in prop::num::f64::NORMAL) {
            let back: f64 = format_significant(v, 9).parse().unwrap();
            prop_assert!(((back - v) / v).abs() <= 5e-9, "{v} -> {back}");
        }
    }
}
