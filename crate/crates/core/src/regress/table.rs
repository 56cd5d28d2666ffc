//! Region-by-regressor coefficient tables: one column per region, one row per
//! regressor, cells like `1.597*** (0.027)`.

use serde_json::{json, Value};

use crate::domain::{Coefficient, FitResult, Regressor};
use crate::error::Result;

pub fn significance_stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.001 => "***",
        Some(p) if p < 0.01 => "**",
        Some(p) if p < 0.05 => "*",
        _ => "",
    }
}

pub fn format_cell(c: &Coefficient) -> String {
    if c.dropped {
        return "0.000 (0.000)".to_string();
    }
    format!("{:.3}{} ({:.3})", c.estimate, significance_stars(c.p_value), c.std_error)
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn row_order(fits: &[(&str, &FitResult)]) -> Vec<Regressor> {
    let mut order: Vec<Regressor> = Vec::new();
    for (_, f) in fits {
        for c in &f.coefficients {
            if !order.contains(&c.regressor) {
                order.push(c.regressor);
            }
        }
    }
    order
}

/// CSV with a header of region names, a row per regressor, then
/// `R-Squared` (overall) and `Num Of Obs`.
pub fn table1_csv(fits: &[(&str, &FitResult)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(fits.iter().map(|(r, _)| r.to_string()));
    w.write_record(&header).map_err(std::io::Error::from)?;
    for reg in row_order(fits) {
        let mut rec = vec![reg.table_label().to_string()];
        rec.extend(fits.iter().map(|(_, f)| f.coef(reg).map(format_cell).unwrap_or_default()));
        w.write_record(&rec).map_err(std::io::Error::from)?;
    }
    let mut r2 = vec!["R-Squared".to_string()];
    r2.extend(fits.iter().map(|(_, f)| format!("{:.2}", f.r_squared)));
    w.write_record(&r2).map_err(std::io::Error::from)?;
    let mut n = vec!["Num Of Obs".to_string()];
    n.extend(fits.iter().map(|(_, f)| thousands(f.n_obs)));
    w.write_record(&n).map_err(std::io::Error::from)?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Machine-readable form: region → fit without per-row residuals.
pub fn table1_json(fits: &[(&str, &FitResult)]) -> Value {
    let map: serde_json::Map<String, Value> = fits
        .iter()
        .map(|(r, f)| (r.to_string(), json!(f.without_residuals())))
        .collect();
    Value::Object(map)
}
