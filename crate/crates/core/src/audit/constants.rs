//! The chain of explicit constants, evaluated in log10 so that values far
//! below the smallest positive double stay representable.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG10_E: f64 = std::f64::consts::LOG10_E;
const LOG10_2: f64 = std::f64::consts::LOG10_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: String,
    pub log10: f64,
    /// Inequality checked for this constant.
    pub check: String,
    pub lhs_log10: f64,
    pub rhs_log10: f64,
    pub strict: bool,
    pub holds: bool,
}

impl Constant {
    pub fn display_value(&self) -> String {
        format_log10(self.log10)
    }
}

/// `10^-338` for exact powers of ten, otherwise `1.89e-166` style.
pub fn format_log10(l: f64) -> String {
    if (l - l.round()).abs() < 1e-9 {
        return format!("10^{}", l.round() as i64);
    }
    let exp = l.floor();
    let mantissa = 10f64.powf(l - exp);
    if (-4.0..6.0).contains(&exp) {
        format!("{:.6}", 10f64.powf(l))
    } else {
        format!("{mantissa:.3}e{}", exp as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub entries: Vec<Constant>,
}

impl ConstantsLedger {
    pub fn get(&self, name: &str) -> Option<&Constant> {
        self.entries.iter().find(|c| c.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|c| c.holds)
    }
}

impl fmt::Display for ConstantsLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.entries {
            writeln!(
                f,
                "{:<10} {:>14}  [{}] {}",
                c.name,
                c.display_value(),
                if c.holds { "ok" } else { "FAIL" },
                c.check
            )?;
        }
        Ok(())
    }
}

struct Builder {
    entries: Vec<Constant>,
}

impl Builder {
    fn le(&mut self, name: &str, log10: f64, check: &str, lhs: f64, rhs: f64) {
        self.push(name, log10, check, lhs, rhs, false);
    }

    fn lt(&mut self, name: &str, log10: f64, check: &str, lhs: f64, rhs: f64) {
        self.push(name, log10, check, lhs, rhs, true);
    }

    fn push(&mut self, name: &str, log10: f64, check: &str, lhs: f64, rhs: f64, strict: bool) {
        let holds = if strict { lhs < rhs } else { lhs <= rhs + 1e-12 };
        self.entries.push(Constant {
            name: name.to_string(),
            log10,
            check: check.to_string(),
            lhs_log10: lhs,
            rhs_log10: rhs,
            strict,
            holds,
        });
    }
}

/// Rebuilds every constant and verifies its defining inequality. Fails if
/// any inequality does not hold.
pub fn compute_constants() -> Result<ConstantsLedger> {
    let lg = f64::log10;
    let mut b = Builder { entries: Vec::new() };

    // Lower tail of region sizes: E[W^{-λ}] = 1/(1 - 2λ) for W ~ Beta(1/2, 1),
    // and λ = 1/2 - 1/C turns e^{-λC}/(1-2λ) into (C/2) e^{1 - C/2}.
    let c_big: f64 = 7.5;
    let lambda = 0.5 - 1.0 / c_big;
    let chernoff = (-lambda * c_big).exp() / (1.0 - 2.0 * lambda);
    b.le("C", lg(c_big), "(C/2) e^(1-C/2) <= 1/4", lg(chernoff), lg(0.25));

    // Upper tail: E[W^λ] = 1/(1 + 2λ); λ = 3 gives 1/7 < 1/5, and then
    // e^{λc}/7 <= 1/4 for c = 1/6.
    let (lambda_up, c_small) = (3.0f64, 1.0f64 / 6.0);
    let moment = 1.0 / (1.0 + 2.0 * lambda_up);
    b.le(
        "c",
        lg(c_small),
        "e^(3c) E[W^3] <= 1/4 with E[W^3] = 1/7 < 1/5",
        lg((lambda_up * c_small).exp() * moment),
        lg(0.25),
    );

    let alpha_l = -6.0;
    let alpha = 10f64.powf(alpha_l);
    b.le("alpha", alpha_l, "1 - 3 sqrt(alpha) >= 0.997", -lg(1.0 - 3.0 * alpha.sqrt()), -lg(0.997));

    let p = 0.997 / 9.0;
    b.le("p", lg(p), "p = (1/9)(1 - 3 sqrt(alpha)) lower bound", lg(p), lg((1.0 - 3.0 * alpha.sqrt()) / 9.0));

    let beta = 1.0 / 20.0;
    b.lt("beta", lg(beta), "beta < p/2", lg(beta), lg(p / 2.0));

    let gamma = (p - 2.0 * beta).powi(2);
    b.lt("gamma", lg(gamma), "gamma = (p - 2 beta)^2 > 0", f64::NEG_INFINITY, lg(gamma));

    let k_l = lg(6.0) - alpha_l + (c_big + 2.0) * LOG10_E + (2.0 * c_big + 4.0) / beta * LOG10_2;
    b.le("K", k_l, "K = (6/alpha) e^(C+2) 2^((2C+4)/beta)", k_l, k_l);

    // Two forms of the δ threshold must agree.
    let thr_a = -2.0 / beta * lg(6.0) + 1.5 * alpha_l - LOG10_2 - k_l;
    let thr_b = (-1.0 - 2.0 / beta) * lg(6.0) - LOG10_2 - (c_big + 2.0) * LOG10_E + 2.5 * alpha_l
        - (2.0 * c_big + 4.0) / beta * LOG10_2;
    b.le(
        "delta*",
        thr_a,
        "6^(-2/beta) alpha^(3/2)/(2K) = 6^(-1-2/beta)/2 e^-(C+2) alpha^(5/2) 2^(-(2C+4)/beta)",
        lg((thr_a - thr_b).abs().max(1e-300)),
        -9.0,
    );

    let delta_l = -166.0;
    b.lt("delta", delta_l, "delta < 6^(-2/beta) alpha^(3/2)/(2K)", delta_l, thr_a);
    let prop = lg(6.0) + beta / 2.0 * (LOG10_2 + delta_l + k_l - 1.5 * alpha_l);
    b.lt("delta", delta_l, "6 (2 delta K / alpha^(3/2))^(beta/2) < 1", prop, 0.0);
    b.lt("delta", delta_l, "delta < alpha^2/4", delta_l, 2.0 * alpha_l - lg(4.0));

    // -2 log(1 - x) >= 2x, so μ <= δ²/4 is sufficient for μ <= -2 log(1 - δ²/8).
    let mu_l = 2.0 * delta_l - 1.0;
    b.le("mu", mu_l, "mu = delta^2/10 <= delta^2/4 <= -2 log(1 - delta^2/8)", mu_l, 2.0 * delta_l - lg(4.0));

    let eta_l = mu_l + lg(beta) - lg(8.0);
    b.lt("eta", eta_l, "eta = mu beta/8 = mu/160 > 10^-336", -336.0, eta_l);

    let xi_l = -336.0;
    b.lt("xi", xi_l, "xi < eta", xi_l, eta_l);
    b.lt("xi", xi_l, "xi < gamma", xi_l, lg(gamma));

    let rho_l = lg(4.0) - 337.0;
    b.lt("rho", rho_l, "rho < xi/2", rho_l, xi_l - LOG10_2);

    let theta = 1.0 / (2.0 * c_big);
    b.le("theta", lg(theta), "theta = 1/(2C) <= 1/(4 log 3)", lg(theta), lg(1.0 / (4.0 * 3f64.ln())));

    let eps_l = -338.0;
    b.lt("eps_mast", eps_l, "eps_mast < rho theta / 2", eps_l, rho_l + lg(theta) - LOG10_2);
    b.lt("eps_holder", eps_l, "eps_holder < eta/(2C)", eps_l, eta_l - lg(2.0 * c_big));

    let ledger = ConstantsLedger { entries: b.entries };
    if let Some(bad) = ledger.entries.iter().find(|c| !c.holds) {
        return Err(Error::Invariant(format!("constant {} fails: {}", bad.name, bad.check)));
    }
    Ok(ledger)
}
