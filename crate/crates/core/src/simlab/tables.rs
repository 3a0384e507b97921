//! Registry of reproducible result tables.
//!
//! Each table id expands to the `(design, method)` rows of one published
//! coverage table: the k-grid {5, 10, 15, 20, 25, 50, 100, 250, 500, 1000}
//! with 500 observations per group, at one of the three levels. Ids without a
//! level suffix default to the 0.10 level.

use crate::methods::RandomSetVariant;
use crate::models::LogisticFitter;
use crate::simlab::design::{SupDesign, UnsupDesign};
use crate::simlab::runner::{DesignSpec, MethodSpec};

pub const K_GRID: [usize; 10] = [5, 10, 15, 20, 25, 50, 100, 250, 500, 1000];
pub const N_GRID: [u32; 6] = [1, 2, 4, 6, 8, 10];
const N_PER_GROUP: usize = 500;

const LEVELS: [(&str, f64); 3] = [("", 0.1), ("-05", 0.05), ("-025", 0.025)];

/// All registered table ids.
pub fn table_ids() -> Vec<String> {
    let mut ids = Vec::new();
    for (suffix, _) in LEVELS {
        for base in [
            "unsup-naive",
            "unsup-subsample",
            "unsup-randomset-mean",
            "unsup-randomset-kde",
            "sup-naive-mu0",
            "sup-naive-mu1",
            "sup-subsample-mu0",
            "sup-subsample-mu1",
            "sup-randomset-mean-mu0",
            "sup-randomset-mean-mu1",
            "sup-randomset-kde-mu0",
            "sup-randomset-kde-mu1",
        ] {
            ids.push(format!("{base}{suffix}"));
        }
    }
    ids
}

fn sup_design(k: usize, mu1: bool) -> DesignSpec {
    let (mu, tau) = if mu1 { (1.0, 0.1) } else { (0.0, 1.0) };
    DesignSpec::Sup(SupDesign::new(k, N_PER_GROUP, mu, tau))
}

fn unsup_design(k: usize) -> DesignSpec {
    DesignSpec::Unsup(UnsupDesign::standard(k, N_PER_GROUP))
}

/// Expand a table id into its experiment rows, or `None` for an unknown id.
pub fn table_rows(id: &str) -> Option<Vec<(DesignSpec, MethodSpec)>> {
    let (base, alpha) = LEVELS
        .iter()
        .rev()
        .find_map(|(suffix, alpha)| {
            if suffix.is_empty() {
                Some((id, *alpha))
            } else {
                id.strip_suffix(suffix).map(|base| (base, *alpha))
            }
        })
        .expect("empty suffix always matches");
    let fitter = LogisticFitter::default_map();
    let mut rows = Vec::new();
    match base {
        "unsup-naive" => {
            for k in K_GRID {
                rows.push((unsup_design(k), MethodSpec::NaiveUnsup { alpha }));
            }
        }
        "unsup-subsample" => {
            for n_subsamples in N_GRID {
                for k in K_GRID {
                    rows.push((
                        unsup_design(k),
                        MethodSpec::SubsampleUnsup {
                            alpha,
                            n_subsamples,
                        },
                    ));
                }
            }
        }
        "unsup-randomset-mean" | "unsup-randomset-kde" => {
            let variant = if base.ends_with("kde") {
                RandomSetVariant::Kde
            } else {
                RandomSetVariant::Mean
            };
            for k in K_GRID {
                rows.push((
                    unsup_design(k),
                    MethodSpec::RandomSetUnsup {
                        delta: alpha / 2.0,
                        epsilon: alpha / 2.0,
                        variant,
                    },
                ));
            }
        }
        "sup-naive-mu0" | "sup-naive-mu1" => {
            for k in K_GRID {
                rows.push((
                    sup_design(k, base.ends_with("mu1")),
                    MethodSpec::NaiveSup { alpha, fitter },
                ));
            }
        }
        "sup-subsample-mu0" | "sup-subsample-mu1" => {
            for n_subsamples in N_GRID {
                for k in K_GRID {
                    rows.push((
                        sup_design(k, base.ends_with("mu1")),
                        MethodSpec::SubsampleSup {
                            alpha,
                            n_subsamples,
                            fitter,
                        },
                    ));
                }
            }
        }
        "sup-randomset-mean-mu0"
        | "sup-randomset-mean-mu1"
        | "sup-randomset-kde-mu0"
        | "sup-randomset-kde-mu1" => {
            let variant = if base.contains("kde") {
                RandomSetVariant::Kde
            } else {
                RandomSetVariant::Mean
            };
            for k in K_GRID {
                rows.push((
                    sup_design(k, base.ends_with("mu1")),
                    MethodSpec::RandomSetSup {
                        delta: alpha / 2.0,
                        epsilon: alpha / 2.0,
                        variant,
                        fitter,
                    },
                ));
            }
        }
        _ => return None,
    }
    Some(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_registered_ids_expand() {
        for id in table_ids() {
            let rows = table_rows(&id).unwrap_or_else(|| panic!("id {id} did not expand"));
            assert!(!rows.is_empty());
        }
        assert!(table_rows("no-such-table").is_none());
    }

    #[test]
    fn naive_table_covers_the_k_grid() {
        let rows = table_rows("unsup-naive").unwrap();
        assert_eq!(rows.len(), K_GRID.len());
        let ks: Vec<usize> = rows.iter().map(|(d, _)| d.k()).collect();
        assert_eq!(ks, K_GRID.to_vec());
        for (_, m) in &rows {
            assert_eq!(m.alpha_total(), 0.1);
        }
        let rows = table_rows("unsup-naive-025").unwrap();
        assert_eq!(rows[0].1.alpha_total(), 0.025);
    }

    #[test]
    fn subsample_table_spans_rounds() {
        let rows = table_rows("unsup-subsample").unwrap();
        assert_eq!(rows.len(), K_GRID.len() * N_GRID.len());
    }
}
