use std::io::Write;

use super::{GlmmFit, RandomTerm, ShuffleResult, ShuffleStatistic};
use crate::error::Result;

/// Regression-table CSV: one row per variance component, predictor and AIC;
/// three columns (estimate, exp(estimate), p) per model. Week dummies and the
/// intercept are left out. `p_values[m]` holds shuffle results for `fits[m]`.
pub fn write_table_csv<W: Write>(writer: W, fits: &[GlmmFit], p_values: &[Vec<ShuffleResult>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["term".to_string()];
    for f in fits {
        header.push(format!("{}_estimate", f.model));
        header.push(format!("{}_exp", f.model));
        header.push(format!("{}_p", f.model));
    }
    w.write_record(&header)?;
    let p_of = |m: usize, s: &ShuffleStatistic| -> String {
        p_values
            .get(m)
            .and_then(|rs| rs.iter().find(|r| &r.statistic == s || same_coefficient(&r.statistic, s)))
            .map(|r| format!("{}", r.p_value))
            .unwrap_or_default()
    };
    for term in RandomTerm::ALL {
        let mut rec = vec![format!("var_{term}")];
        for (m, f) in fits.iter().enumerate() {
            match f.variance(term) {
                Some(v) => {
                    rec.push(format!("{v}"));
                    rec.push(String::new());
                    rec.push(p_of(m, &ShuffleStatistic::Variance { term }));
                }
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    let mut predictors: Vec<String> = Vec::new();
    for f in fits {
        for c in &f.columns {
            if c != "intercept" && !c.starts_with("week_") && !predictors.contains(c) {
                predictors.push(c.clone());
            }
        }
    }
    for name in &predictors {
        let mut rec = vec![name.clone()];
        for (m, f) in fits.iter().enumerate() {
            match f.coefficient(name) {
                Some((b, _)) => {
                    rec.push(format!("{b}"));
                    rec.push(format!("{}", b.exp()));
                    rec.push(p_of(
                        m,
                        &ShuffleStatistic::Coefficient {
                            name: name.clone(),
                            two_sided: true,
                        },
                    ));
                }
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    for (label, pick) in [
        ("host_age_per_year", 0usize),
        ("host_age2_per_year2", 1),
        ("guest_age_per_year", 2),
    ] {
        if fits.iter().all(|f| raw(f, pick).is_none()) {
            continue;
        }
        let mut rec = vec![label.to_string()];
        for f in fits {
            match raw(f, pick) {
                Some((b, _)) => rec.extend([format!("{b}"), format!("{}", b.exp()), String::new()]),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    let mut rec = vec!["aic".to_string()];
    for f in fits {
        rec.extend([format!("{}", f.aic), String::new(), String::new()]);
    }
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

fn raw(f: &GlmmFit, k: usize) -> Option<(f64, f64)> {
    match k {
        0 => f.raw_age.host_age,
        1 => f.raw_age.host_age2,
        _ => f.raw_age.guest_age,
    }
}

fn same_coefficient(a: &ShuffleStatistic, b: &ShuffleStatistic) -> bool {
    matches!((a, b), (ShuffleStatistic::Coefficient { name: x, .. }, ShuffleStatistic::Coefficient { name: y, .. }) if x == y)
}

#[cfg(test)]
mod tests {
    use super::super::fit::tests::{design, toy};
    use super::super::{fit, FitOptions};
    use super::*;

    #[test]
    fn table_layout() {
        let t = toy(150, 5, 5, [-0.5, 1.0], [0.7, 0.3], 2);
        let x: Vec<Vec<f64>> = t.x.iter().map(|v| vec![v[0], v[0] * v[0]]).collect();
        let a = design(&t.x, &t.y, &t.host, &t.guest, &["x"], &[RandomTerm::Host, RandomTerm::Guest]);
        let mut b = design(&x, &t.y, &t.host, &t.guest, &["x", "x2"], &[RandomTerm::Host, RandomTerm::Guest]);
        b.model = "U".into();
        let fa = fit(&a, FitOptions::default()).unwrap();
        let fb = fit(&b, FitOptions::default()).unwrap();
        let p = vec![
            vec![],
            vec![ShuffleResult {
                statistic: ShuffleStatistic::Coefficient {
                    name: "x2".into(),
                    two_sided: true,
                },
                observed: 0.0,
                p_value: 0.25,
                null: vec![],
                failures: 0,
            }],
        ];
        let mut out = Vec::new();
        write_table_csv(&mut out, &[fa.clone(), fb], &p).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "term,T_estimate,T_exp,T_p,U_estimate,U_exp,U_p");
        let terms: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(terms, ["var_host", "var_guest", "var_dyad", "x", "x2", "aic"]);
        assert!(lines[3].starts_with("var_dyad,,,,,,"));
        assert!(lines[5].starts_with("x2,,,,") && lines[5].ends_with(",0.25"));
        assert!(lines[6].starts_with(&format!("aic,{}", fa.aic)));
    }
}
