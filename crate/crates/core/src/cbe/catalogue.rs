use num_complex::Complex64;

use super::term::{Rational, TsbTerm};

/// A named representative of the built-in term family.
#[derive(Debug, Clone)]
pub struct BuiltinFamily {
    pub name: &'static str,
    pub term: TsbTerm,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Representative instances used by property tests and the acceptance suite.
/// The oracle instances (`linear`, `conj_linear`, `radial_cubic`) are
/// unbounded.
pub fn builtin_families() -> Vec<BuiltinFamily> {
    let zero = c(0.0, 0.0);

    let mut bump = [zero; 10];
    bump[0] = c(0.2, 0.0);
    bump[1] = c(1.0, 0.5);
    bump[5] = c(0.3, 0.0);
    bump[7] = c(-1.0, 0.0);

    let mut generic = [zero; 10];
    generic[0] = c(0.1, -0.3);
    generic[1] = c(0.8, 0.2);
    generic[2] = c(-0.4, 0.1);
    generic[3] = c(0.25, 0.0);
    generic[4] = c(0.0, 0.3);
    generic[6] = c(0.05, -0.05);
    generic[7] = c(-0.9, 0.1);
    generic[8] = c(0.2, 0.2);
    generic[9] = c(-0.1, 0.0);

    let rational = Rational {
        q0: 1.0,
        q1: -1.0,
        d1: 0.0,
        d2: 1.0,
    };

    let mut mixed = [zero; 10];
    mixed[1] = c(0.0, 1.0);
    mixed[2] = c(0.3, 0.0);
    mixed[7] = c(0.5, -0.2);

    vec![
        BuiltinFamily { name: "zero", term: TsbTerm::zero() },
        BuiltinFamily { name: "constant", term: TsbTerm::constant(c(0.3, 0.2)) },
        BuiltinFamily { name: "linear", term: TsbTerm::linear(c(1.0, 0.5)) },
        BuiltinFamily { name: "conj_linear", term: TsbTerm::conj_linear(c(0.7, -0.2)) },
        BuiltinFamily { name: "radial_cubic", term: TsbTerm::radial_cubic(1.0, 1.0) },
        BuiltinFamily {
            name: "gauss_bump",
            term: TsbTerm::poly_gauss(0.5, Rational::default(), bump).expect("valid"),
        },
        BuiltinFamily {
            name: "gauss_generic",
            term: TsbTerm::poly_gauss(1.0, Rational::default(), generic).expect("valid"),
        },
        BuiltinFamily {
            name: "rational",
            term: TsbTerm::poly_gauss(0.0, rational, [zero; 10]).expect("valid"),
        },
        BuiltinFamily {
            name: "gauss_rational",
            term: TsbTerm::poly_gauss(0.8, rational, mixed).expect("valid"),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_families_respect_declared_bound() {
        // 10⁴ samples with |w| ≤ 10³ for every bounded instance.
        for fam in builtin_families() {
            let Some(b) = fam.term.bound() else { continue };
            let sup = fam.term.sampled_sup(1e3, 100, 100);
            assert!(sup <= b, "{}: sup {sup} > bound {b}", fam.name);
        }
    }

    #[test]
    fn oracle_families_are_unbounded() {
        for fam in builtin_families() {
            let expect_unbounded = matches!(fam.name, "linear" | "conj_linear" | "radial_cubic");
            assert_eq!(fam.term.bound().is_none(), expect_unbounded, "{}", fam.name);
        }
    }
}
