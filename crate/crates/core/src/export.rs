//! CSV and JSON writers. Floats are written with 17 significant digits so
//! every value round-trips bit-exactly.

use std::io::Write;

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::dynamics::{Histogram, Trajectory};
use crate::error::Result;
use crate::tangent::FrameRecord;

/// `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn raw_number(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        fmt17(x)
    } else {
        "null".to_string()
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

/// `serialize_with` helper: a JSON number with 17 significant digits
/// (`null` for non-finite values).
pub fn sig17<S: Serializer>(x: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    raw_number(*x).serialize(ser)
}

pub fn sig17_vec<S: Serializer>(xs: &[f64], ser: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&raw_number(x))?;
    }
    seq.end()
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt17).collect::<Vec<_>>().join(",")
}

/// `n,x1,..,xM`, one row per stored point, indices from `-K'`.
pub fn write_trajectory_csv<const M: usize>(
    out: &mut impl Write,
    trajectory: &Trajectory<M>,
) -> Result<()> {
    let header: Vec<String> = (1..=M).map(|i| format!("x{i}")).collect();
    writeln!(out, "n,{}", header.join(","))?;
    for (i, x) in trajectory.all().iter().enumerate() {
        writeln!(
            out,
            "{},{}",
            trajectory.index_of(i),
            join(x.iter().copied())
        )?;
    }
    Ok(())
}

/// `n,q1,q2,alpha,v1,v2,a,p1,p2,y1,y2,c[,w1,w2,gamma,g,b]` (for `M = 2`).
pub fn write_frames_csv<const M: usize>(
    out: &mut impl Write,
    frames: &[FrameRecord<M>],
) -> Result<()> {
    let with_diag = frames.first().is_some_and(|f| f.diagnostics.is_some());
    let vecs = |name: &str| {
        (1..=M)
            .map(|i| format!("{name}{i}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut header = format!(
        "n,{},alpha,{},a,{},{},c",
        vecs("q"),
        vecs("v"),
        vecs("p"),
        vecs("y")
    );
    if with_diag {
        header.push_str(&format!(",{},gamma,g,b", vecs("w")));
    }
    writeln!(out, "{header}")?;
    for rec in frames {
        let f = &rec.frame;
        let mut row = vec![];
        row.extend(f.q.iter().copied());
        row.push(f.alpha);
        row.extend(f.v.iter().copied());
        row.push(f.a);
        row.extend(f.p.iter().copied());
        row.extend(f.y.iter().copied());
        row.push(f.c);
        if with_diag {
            if let Some(d) = &rec.diagnostics {
                row.extend(d.w.iter().copied());
                row.extend([d.gamma, d.g, d.b]);
            }
        }
        writeln!(out, "{},{}", rec.n, join(row))?;
    }
    Ok(())
}

/// `ix,iy,x1,x2,p` with bin centers.
pub fn write_histogram_csv(out: &mut impl Write, hist: &Histogram) -> Result<()> {
    writeln!(out, "ix,iy,x1,x2,p")?;
    for ix in 0..hist.bins_x {
        for iy in 0..hist.bins_y {
            let (cx, cy) = hist.center(ix, iy);
            writeln!(out, "{ix},{iy},{}", join([cx, cy, hist.get(ix, iy)]))?;
        }
    }
    Ok(())
}

/// `s,mean,stderr`.
pub fn write_response_curve_csv(
    out: &mut impl Write,
    curve: &crate::validation::ResponseCurve,
) -> Result<()> {
    writeln!(out, "s,mean,stderr")?;
    for ((s, m), e) in curve.grid.iter().zip(&curve.means).zip(&curve.stderrs) {
        writeln!(out, "{}", join([*s, *m, *e]))?;
    }
    Ok(())
}

/// `k,mean,variance`.
pub fn write_variance_profile_csv(
    out: &mut impl Write,
    result: &crate::response::DirectRuelleResult,
) -> Result<()> {
    writeln!(out, "k,mean,variance")?;
    for (k, (m, v)) in result
        .per_k_mean
        .iter()
        .zip(&result.per_k_variance)
        .enumerate()
    {
        writeln!(out, "{k},{}", join([*m, *v]))?;
    }
    Ok(())
}
