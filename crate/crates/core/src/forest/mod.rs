//! Forest family descriptions: the input to every factorization. A family
//! lists factor templates; each template lists component batches; templates
//! may repeat omega times so the family always has infinitely many factors.

pub mod factor;
pub mod generator;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::count::Count;
use crate::enumeration::unpair;
use crate::error::{Error, Result};

pub use factor::{
    pool_of_position, position_of_pool, ComponentRef, Factor, FactorLayout, ForestVertex,
};
pub use generator::{Shape, ShapeSpec};

/// One batch of identical components inside a factor template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentBatch {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    pub multiplicity: Count,
}

/// One factor template together with how many factors it stands for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorTemplate {
    pub components: Vec<ComponentBatch>,
    #[serde(default = "default_repeat")]
    pub repeat: Count,
}

fn default_repeat() -> Count {
    Count::Finite(1)
}

/// Whole-family description: the document format the CLI reads and writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub factors: Vec<FactorTemplate>,
}

/// A single admissibility violation, tied to the place that caused it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub place: String,
    pub message: String,
}

/// Outcome of validating a family description.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every factor has infinitely many components, that no
/// component is an isolated vertex, and that the expansion yields
/// infinitely many factors.
pub fn validate(spec: &FamilySpec) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |place: String, message: String| violations.push(Violation { place, message });
    if spec.factors.is_empty() {
        push("family".into(), "no factor templates".into());
    } else if !spec.factors.iter().any(|t| t.repeat == Count::Omega) {
        push(
            "family".into(),
            "finitely many factors after repeat expansion; some template must repeat omega".into(),
        );
    }
    for (ti, t) in spec.factors.iter().enumerate() {
        let place = format!("factor template {ti}");
        if t.components.is_empty() {
            push(place.clone(), "no component batches".into());
        } else if !t.components.iter().any(|b| b.multiplicity == Count::Omega) {
            push(
                place.clone(),
                "finite component count; some batch must have multiplicity omega".into(),
            );
        }
        if t.repeat == Count::Finite(0) {
            push(place.clone(), "repeat 0 leaves the template unused".into());
        }
        for (bi, b) in t.components.iter().enumerate() {
            let bplace = format!("{place}, batch {bi}");
            if b.multiplicity == Count::Finite(0) {
                push(bplace.clone(), "zero multiplicity".into());
            }
            if let Err(message) = b.shape.compile() {
                push(bplace, message);
            }
        }
    }
    ValidationReport { violations }
}

/// Canonical byte-stable text form: JSON with sorted keys and plain number
/// forms; identical specs always serialize identically.
pub fn normalize(spec: &FamilySpec) -> Result<String> {
    let value = serde_json::to_value(spec).map_err(|_| Error::InvalidFamily(1))?;
    serde_json::to_string_pretty(&value).map_err(|_| Error::InvalidFamily(1))
}

/// Compiled family: factor templates compiled to layouts plus the repeat
/// expansion that maps every factor index to its template.
#[derive(Clone, Debug)]
pub struct Family {
    spec: FamilySpec,
    layouts: Vec<Arc<FactorLayout>>,
    finite_spans: Vec<(u64, u64, usize)>,
    finite_total: u64,
    omega_templates: Vec<usize>,
}

impl Family {
    pub fn new(spec: FamilySpec) -> Result<Family> {
        let report = validate(&spec);
        if !report.is_valid() {
            return Err(Error::InvalidFamily(report.violations.len()));
        }
        let mut layouts = Vec::with_capacity(spec.factors.len());
        for t in &spec.factors {
            let batches = t
                .components
                .iter()
                .map(|b| {
                    b.shape
                        .compile()
                        .map(|s| (Arc::new(s), b.multiplicity))
                        .map_err(|_| Error::InvalidFamily(1))
                })
                .collect::<Result<Vec<_>>>()?;
            layouts.push(Arc::new(FactorLayout::new(batches)?));
        }
        let mut finite_spans = Vec::new();
        let mut finite_total = 0u64;
        let mut omega_templates = Vec::new();
        for (ti, t) in spec.factors.iter().enumerate() {
            match t.repeat {
                Count::Finite(r) => {
                    finite_spans.push((finite_total, r, ti));
                    finite_total = finite_total
                        .checked_add(r)
                        .ok_or(Error::Overflow("repeat prefix"))?;
                }
                Count::Omega => omega_templates.push(ti),
            }
        }
        Ok(Family {
            spec,
            layouts,
            finite_spans,
            finite_total,
            omega_templates,
        })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    /// Template backing factor `m`: finite repeats form a prefix block in
    /// listed order; past it, the omega-repeat templates share all factor
    /// indices via the unpair dovetail.
    pub fn template_index(&self, m: u64) -> usize {
        if m < self.finite_total {
            for &(start, len, ti) in &self.finite_spans {
                if m >= start && m < start + len {
                    return ti;
                }
            }
            unreachable!("finite spans tile the prefix");
        }
        let (a, _) = unpair(m - self.finite_total);
        self.omega_templates[(a % self.omega_templates.len() as u64) as usize]
    }

    pub fn layout(&self, m: u64) -> Arc<FactorLayout> {
        self.layouts[self.template_index(m)].clone()
    }

    /// Enumeration surface of factor `m`.
    pub fn factor(&self, m: u64) -> Factor {
        Factor::direct(self.layout(m))
    }

    pub fn vertex_count(&self, _m: u64) -> Count {
        Count::Omega
    }

    pub fn degree(&self, v: ForestVertex) -> Result<Count> {
        self.factor(v.factor).degree(v.index)
    }

    /// Neighbors in ascending canonical index order.
    pub fn kth_neighbor(&self, v: ForestVertex, k: u64) -> Result<ForestVertex> {
        let index = self.factor(v.factor).kth_neighbor(v.index, k)?;
        Ok(ForestVertex {
            factor: v.factor,
            index,
        })
    }

    pub fn component_of(&self, v: ForestVertex) -> Result<ComponentRef> {
        let (position, _) = self.factor(v.factor).decode(v.index)?;
        let (pool, rank) = pool_of_position(position);
        Ok(ComponentRef {
            factor: v.factor,
            pool,
            rank,
        })
    }

    /// Least-index vertex of the component.
    pub fn root_of(&self, c: ComponentRef) -> Result<ForestVertex> {
        let position = position_of_pool(c.pool, c.rank)?;
        let index = self.factor(c.factor).root_index_of_position(position)?;
        Ok(ForestVertex {
            factor: c.factor,
            index,
        })
    }

    /// The rank-`r` component of pool `d`, after checking the pool admits
    /// that rank.
    pub fn pool_component(&self, m: u64, d: u64, r: u64) -> Result<ComponentRef> {
        position_of_pool(d, r)?;
        Ok(ComponentRef {
            factor: m,
            pool: d,
            rank: r,
        })
    }
}

/// Family of regular-tree factors of the given degree; degree 1 yields the
/// single-edge (perfect matching) family.
pub fn lambda_family(lambda: Count) -> Result<FamilySpec> {
    if lambda == Count::Finite(0) {
        return Err(Error::LambdaZero);
    }
    Ok(FamilySpec {
        factors: vec![FactorTemplate {
            components: vec![ComponentBatch {
                shape: ShapeSpec::RegularTree { degree: lambda },
                multiplicity: Count::Omega,
            }],
            repeat: Count::Omega,
        }],
    })
}

/// Named families usable without a spec file.
pub fn builtin_family(name: &str) -> Option<FamilySpec> {
    match name {
        "k2-family" => lambda_family(Count::Finite(1)).ok(),
        "omega-regular" => lambda_family(Count::Omega).ok(),
        "star-mix" => Some(FamilySpec {
            factors: vec![
                FactorTemplate {
                    components: vec![ComponentBatch {
                        shape: ShapeSpec::Star {
                            leaves: Count::Omega,
                        },
                        multiplicity: Count::Omega,
                    }],
                    repeat: Count::Omega,
                },
                FactorTemplate {
                    components: vec![
                        ComponentBatch {
                            shape: ShapeSpec::Star {
                                leaves: Count::Finite(3),
                            },
                            multiplicity: Count::Omega,
                        },
                        ComponentBatch {
                            shape: ShapeSpec::RegularTree {
                                degree: Count::Finite(1),
                            },
                            multiplicity: Count::Omega,
                        },
                    ],
                    repeat: Count::Omega,
                },
            ],
        }),
        "mixed-finite" => Some(FamilySpec {
            factors: vec![
                FactorTemplate {
                    components: vec![ComponentBatch {
                        shape: ShapeSpec::Path { vertices: 4 },
                        multiplicity: Count::Omega,
                    }],
                    repeat: Count::Omega,
                },
                FactorTemplate {
                    components: vec![ComponentBatch {
                        shape: ShapeSpec::FiniteEdgeList {
                            edges: vec![(0, 1), (0, 2), (2, 3), (2, 4)],
                        },
                        multiplicity: Count::Omega,
                    }],
                    repeat: Count::Omega,
                },
                FactorTemplate {
                    components: vec![
                        ComponentBatch {
                            shape: ShapeSpec::Star {
                                leaves: Count::Finite(3),
                            },
                            multiplicity: Count::Omega,
                        },
                        ComponentBatch {
                            shape: ShapeSpec::Path { vertices: 2 },
                            multiplicity: Count::Omega,
                        },
                    ],
                    repeat: Count::Omega,
                },
            ],
        }),
        _ => {
            let n = name.strip_prefix("lambda:")?;
            let degree = if n == "omega" {
                Count::Omega
            } else {
                Count::Finite(n.parse().ok()?)
            };
            lambda_family(degree).ok()
        }
    }
}

/// Which positions of which factors realize a packed partial family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackMask {
    factors: Vec<FactorPositions>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FactorPositions {
    finite_total: u64,
    omega_real: u64,
    omega_total: u64,
}

impl PackMask {
    /// True when the component at `position` of factor `m` belongs to the
    /// packed input rather than the padding.
    pub fn admits(&self, factor: u64, position: u64) -> bool {
        let Some(f) = self.factors.get(factor as usize) else {
            return false;
        };
        if position < f.finite_total {
            return true;
        }
        (position - f.finite_total) % f.omega_total < f.omega_real
    }

    /// Number of factors carrying any real components.
    pub fn factor_count(&self) -> u64 {
        self.factors.len() as u64
    }
}

/// Pads a partial family (one batch list per requested forest) into a full
/// admissible family, with single-edge filler components and filler
/// factors, and reports which positions realize the input.
pub fn pack_family(partial: &[Vec<ComponentBatch>]) -> Result<(FamilySpec, PackMask)> {
    let filler = ComponentBatch {
        shape: ShapeSpec::RegularTree {
            degree: Count::Finite(1),
        },
        multiplicity: Count::Omega,
    };
    let mut factors = Vec::new();
    let mut masks = Vec::new();
    for batches in partial {
        if batches.is_empty() {
            return Err(Error::InvalidFamily(1));
        }
        let mut finite_total = 0u64;
        let mut omega_real = 0u64;
        for b in batches {
            match b.multiplicity {
                Count::Finite(n) => {
                    finite_total = finite_total
                        .checked_add(n)
                        .ok_or(Error::Overflow("packing prefix"))?;
                }
                Count::Omega => omega_real += 1,
            }
        }
        let mut components = batches.clone();
        components.push(filler.clone());
        factors.push(FactorTemplate {
            components,
            repeat: Count::Finite(1),
        });
        masks.push(FactorPositions {
            finite_total,
            omega_real,
            omega_total: omega_real + 1,
        });
    }
    factors.push(FactorTemplate {
        components: vec![filler],
        repeat: Count::Omega,
    });
    let spec = FamilySpec { factors };
    let report = validate(&spec);
    if !report.is_valid() {
        return Err(Error::InvalidFamily(report.violations.len()));
    }
    Ok((spec, PackMask { factors: masks }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2_family_is_valid() {
        let spec = builtin_family("k2-family").unwrap();
        assert!(validate(&spec).is_valid());
        Family::new(spec).unwrap();
    }

    #[test]
    fn finite_component_count_is_rejected() {
        let spec = FamilySpec {
            factors: vec![FactorTemplate {
                components: vec![ComponentBatch {
                    shape: ShapeSpec::Path { vertices: 3 },
                    multiplicity: Count::Finite(5),
                }],
                repeat: Count::Omega,
            }],
        };
        let report = validate(&spec);
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("finite component count")));
        assert!(Family::new(spec).is_err());
    }

    #[test]
    fn isolated_vertex_is_rejected() {
        let spec = FamilySpec {
            factors: vec![FactorTemplate {
                components: vec![ComponentBatch {
                    shape: ShapeSpec::Star {
                        leaves: Count::Finite(0),
                    },
                    multiplicity: Count::Omega,
                }],
                repeat: Count::Omega,
            }],
        };
        let report = validate(&spec);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("isolated vertex")));
    }

    #[test]
    fn finite_factor_expansion_is_rejected() {
        let mut spec = builtin_family("k2-family").unwrap();
        spec.factors[0].repeat = Count::Finite(7);
        let report = validate(&spec);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("finitely many factors")));
    }

    #[test]
    fn normalization_is_stable_and_invertible() {
        let spec = builtin_family("mixed-finite").unwrap();
        let a = normalize(&spec).unwrap();
        let b = normalize(&spec.clone()).unwrap();
        assert_eq!(a, b);
        let back: FamilySpec = serde_json::from_str(&a).unwrap();
        assert_eq!(back, spec);
        assert_eq!(normalize(&back).unwrap(), a);
    }

    #[test]
    fn spec_document_form_parses() {
        let text = r#"{
            "factors": [
                {"components": [{"kind": "star", "params": {"leaves": "omega"},
                                 "multiplicity": "omega"}]},
                {"components": [{"kind": "ray", "multiplicity": 3},
                                {"kind": "regular-tree", "params": {"degree": 1},
                                 "multiplicity": "omega"}],
                 "repeat": "omega"}
            ]
        }"#;
        let spec: FamilySpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.factors[0].repeat, Count::Finite(1));
        assert_eq!(spec.factors[1].repeat, Count::Omega);
        assert_eq!(spec.factors[1].components[0].multiplicity, Count::Finite(3));
    }

    #[test]
    fn builtin_names_resolve() {
        for name in [
            "k2-family",
            "omega-regular",
            "star-mix",
            "mixed-finite",
            "lambda:3",
        ] {
            let spec = builtin_family(name).unwrap_or_else(|| panic!("{name} must resolve"));
            assert!(validate(&spec).is_valid(), "{name} must validate");
        }
        assert!(builtin_family("lambda:0").is_none());
        assert!(builtin_family("lambda:x").is_none());
        assert!(builtin_family("unknown").is_none());
        assert_eq!(
            builtin_family("lambda:omega").unwrap(),
            builtin_family("omega-regular").unwrap()
        );
        assert_eq!(
            builtin_family("lambda:1").unwrap(),
            builtin_family("k2-family").unwrap()
        );
    }

    #[test]
    fn lambda_zero_is_an_error() {
        assert!(matches!(
            lambda_family(Count::Finite(0)),
            Err(Error::LambdaZero)
        ));
    }

    #[test]
    fn repeat_expansion_covers_templates() {
        let fam = Family::new(builtin_family("star-mix").unwrap()).unwrap();
        let mut used = [0usize; 2];
        for m in 0..20u64 {
            used[fam.template_index(m)] += 1;
        }
        assert!(
            used[0] >= 5 && used[1] >= 5,
            "both templates recur: {used:?}"
        );

        let mut spec = builtin_family("k2-family").unwrap();
        spec.factors.insert(
            0,
            FactorTemplate {
                components: vec![ComponentBatch {
                    shape: ShapeSpec::Path { vertices: 3 },
                    multiplicity: Count::Omega,
                }],
                repeat: Count::Finite(2),
            },
        );
        let fam = Family::new(spec).unwrap();
        assert_eq!(fam.template_index(0), 0);
        assert_eq!(fam.template_index(1), 0);
        for m in 2..10 {
            assert_eq!(
                fam.template_index(m),
                1,
                "suffix factors use the omega template"
            );
        }
    }

    #[test]
    fn component_ops_are_consistent() {
        let fam = Family::new(builtin_family("mixed-finite").unwrap()).unwrap();
        for m in 0..4u64 {
            let v0 = ForestVertex {
                factor: m,
                index: 0,
            };
            let c = fam.component_of(v0).unwrap();
            assert_eq!(c.pool, 0);
            assert_eq!(c.rank, 0);
            assert_eq!(fam.root_of(c).unwrap(), v0);
            for r in 0..3u64 {
                let cr = fam.pool_component(m, 1, r).unwrap();
                let root = fam.root_of(cr).unwrap();
                assert_eq!(fam.component_of(root).unwrap(), cr);
            }
            assert!(fam.pool_component(m, 0, 1).is_err());
        }
    }

    #[test]
    fn pack_single_ray() {
        let (spec, mask) = pack_family(&[vec![ComponentBatch {
            shape: ShapeSpec::Ray,
            multiplicity: Count::Finite(1),
        }]])
        .unwrap();
        assert!(validate(&spec).is_valid());
        let fam = Family::new(spec).unwrap();
        // Factor 0 position 0 is the ray; everything else is padding.
        assert_eq!(fam.factor(0).order_at(0).unwrap(), Count::Omega);
        assert!(mask.admits(0, 0));
        for p in 1..10u64 {
            assert!(!mask.admits(0, p));
        }
        for p in 0..10u64 {
            assert!(!mask.admits(1, p));
        }
    }

    #[test]
    fn pack_omega_copies_of_a_tree() {
        let (spec, mask) = pack_family(&[vec![ComponentBatch {
            shape: ShapeSpec::Path { vertices: 4 },
            multiplicity: Count::Omega,
        }]])
        .unwrap();
        let fam = Family::new(spec).unwrap();
        for p in 0..12u64 {
            let real = p % 2 == 0;
            assert_eq!(mask.admits(0, p), real, "position {p}");
            let order = fam.factor(0).order_at(p).unwrap();
            assert_eq!(order, Count::Finite(if real { 4 } else { 2 }));
        }
    }

    #[test]
    fn pack_rejects_isolated_vertices() {
        let result = pack_family(&[vec![ComponentBatch {
            shape: ShapeSpec::Star {
                leaves: Count::Finite(0),
            },
            multiplicity: Count::Finite(1),
        }]]);
        assert!(result.is_err());
    }
}
