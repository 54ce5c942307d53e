//! Exact set algebra over the attribute domain.
//!
//! A conjunctive clause describes an axis-aligned region: an interval per
//! numeric attribute (with open or closed ends, numeric attributes are
//! unbounded reals) and an allowed category set per categorical attribute.
//! Rules with exclusion clauses are regions minus a union of such boxes.

use crate::data::{AttributeKind, Schema, Value};

use super::{Clause, FeedbackRule, Op, Predicate};

/// A real interval. Infinite ends are always open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub lo_open: bool,
    pub hi: f64,
    pub hi_open: bool,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        lo_open: true,
        hi: f64::INFINITY,
        hi_open: true,
    };

    pub fn point(v: f64) -> Self {
        Interval {
            lo: v,
            lo_open: false,
            hi: v,
            hi_open: false,
        }
    }

    /// The set of reals satisfying `x <op> v`; `None` for `!=`, which is not
    /// an interval.
    pub fn from_op(op: Op, v: f64) -> Option<Self> {
        let full = Interval::FULL;
        Some(match op {
            Op::Eq => Interval::point(v),
            Op::Lt => Interval {
                hi: v,
                hi_open: true,
                ..full
            },
            Op::Le => Interval {
                hi: v,
                hi_open: false,
                ..full
            },
            Op::Gt => Interval {
                lo: v,
                lo_open: true,
                ..full
            },
            Op::Ge => Interval {
                lo: v,
                lo_open: false,
                ..full
            },
            Op::Ne => return None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_open) = if self.lo > other.lo {
            (self.lo, self.lo_open)
        } else if other.lo > self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi < other.hi {
            (self.hi, self.hi_open)
        } else if other.hi < self.hi {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open || other.hi_open)
        };
        Interval {
            lo,
            lo_open,
            hi,
            hi_open,
        }
    }

    /// `self \ other` as at most two disjoint non-empty intervals.
    pub fn subtract(&self, other: &Interval) -> Vec<Interval> {
        if self.intersect(other).is_empty() {
            return vec![*self];
        }
        let left = self.intersect(&Interval {
            lo: f64::NEG_INFINITY,
            lo_open: true,
            hi: other.lo,
            hi_open: !other.lo_open || other.lo == f64::NEG_INFINITY,
        });
        let right = self.intersect(&Interval {
            lo: other.hi,
            lo_open: !other.hi_open || other.hi == f64::INFINITY,
            hi: f64::INFINITY,
            hi_open: true,
        });
        [left, right].into_iter().filter(|i| !i.is_empty()).collect()
    }
}

/// Per-attribute allowed values.
#[derive(Clone, Debug, PartialEq)]
pub enum AttrDomain {
    Num(Interval),
    Cat(Vec<bool>),
}

impl AttrDomain {
    fn is_empty(&self) -> bool {
        match self {
            AttrDomain::Num(i) => i.is_empty(),
            AttrDomain::Cat(s) => !s.iter().any(|&b| b),
        }
    }

    fn intersect(&self, other: &AttrDomain) -> AttrDomain {
        match (self, other) {
            (AttrDomain::Num(a), AttrDomain::Num(b)) => AttrDomain::Num(a.intersect(b)),
            (AttrDomain::Cat(a), AttrDomain::Cat(b)) => {
                AttrDomain::Cat(a.iter().zip(b).map(|(x, y)| *x && *y).collect())
            }
            _ => panic!("attribute kinds differ"),
        }
    }

    fn subtract(&self, other: &AttrDomain) -> Vec<AttrDomain> {
        match (self, other) {
            (AttrDomain::Num(a), AttrDomain::Num(b)) => {
                a.subtract(b).into_iter().map(AttrDomain::Num).collect()
            }
            (AttrDomain::Cat(a), AttrDomain::Cat(b)) => {
                let rest = AttrDomain::Cat(a.iter().zip(b).map(|(x, y)| *x && !*y).collect());
                if rest.is_empty() {
                    vec![]
                } else {
                    vec![rest]
                }
            }
            _ => panic!("attribute kinds differ"),
        }
    }

    pub fn contains(&self, v: Value) -> bool {
        match (self, v) {
            (AttrDomain::Num(i), Value::Num(x)) => i.contains(x),
            (AttrDomain::Cat(s), Value::Cat(c)) => s.get(c).copied().unwrap_or(false),
            _ => false,
        }
    }
}

/// An axis-aligned box over the whole attribute domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub dims: Vec<AttrDomain>,
}

impl Region {
    pub fn full(schema: &Schema) -> Self {
        Region {
            dims: schema
                .attributes
                .iter()
                .map(|a| match &a.kind {
                    AttributeKind::Numeric => AttrDomain::Num(Interval::FULL),
                    AttributeKind::Categorical { categories } => {
                        AttrDomain::Cat(vec![true; categories.len()])
                    }
                })
                .collect(),
        }
    }

    pub fn restrict(&mut self, p: &Predicate) {
        let dim = &mut self.dims[p.attr];
        match (dim, p.value) {
            (AttrDomain::Num(i), Value::Num(v)) => {
                let bound = Interval::from_op(p.op, v)
                    .expect("numeric predicates never use `!=`");
                *i = i.intersect(&bound);
            }
            (AttrDomain::Cat(s), Value::Cat(c)) => match p.op {
                Op::Eq => {
                    for (j, b) in s.iter_mut().enumerate() {
                        *b = *b && j == c;
                    }
                }
                Op::Ne => {
                    if let Some(b) = s.get_mut(c) {
                        *b = false;
                    }
                }
                _ => panic!("ordering operator on a categorical attribute"),
            },
            _ => panic!("predicate value kind does not match attribute"),
        }
    }

    pub fn from_clause(schema: &Schema, clause: &Clause) -> Self {
        let mut r = Region::full(schema);
        for p in &clause.predicates {
            r.restrict(p);
        }
        r
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().any(AttrDomain::is_empty)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region {
            dims: self
                .dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| a.intersect(b))
                .collect(),
        }
    }

    pub fn contains(&self, values: &[Value]) -> bool {
        self.dims.iter().zip(values).all(|(d, v)| d.contains(*v))
    }

    /// `self \ other` as pairwise-disjoint non-empty boxes.
    pub fn subtract(&self, other: &Region) -> Vec<Region> {
        if self.intersect(other).is_empty() {
            return vec![self.clone()];
        }
        let mut pieces = Vec::new();
        let mut prefix = self.clone();
        for i in 0..self.dims.len() {
            for part in self.dims[i].subtract(&other.dims[i]) {
                let mut piece = prefix.clone();
                piece.dims[i] = part;
                if !piece.is_empty() {
                    pieces.push(piece);
                }
            }
            prefix.dims[i] = self.dims[i].intersect(&other.dims[i]);
        }
        pieces
    }
}

/// Whether `region` minus the union of `holes` contains any point.
pub fn nonempty_minus(region: &Region, holes: &[Region]) -> bool {
    if region.is_empty() {
        return false;
    }
    let Some((first, rest)) = holes.split_first() else {
        return true;
    };
    region
        .subtract(first)
        .iter()
        .any(|piece| nonempty_minus(piece, rest))
}

/// Whether some point of the domain satisfies both rules.
pub fn rules_intersect(schema: &Schema, a: &FeedbackRule, b: &FeedbackRule) -> bool {
    let both = Region::from_clause(schema, &a.clause).intersect(&Region::from_clause(schema, &b.clause));
    let holes: Vec<Region> = a
        .exclusions
        .iter()
        .chain(&b.exclusions)
        .map(|c| Region::from_clause(schema, c))
        .collect();
    nonempty_minus(&both, &holes)
}

/// Whether any point of the domain satisfies the rule.
pub fn rule_satisfiable(schema: &Schema, rule: &FeedbackRule) -> bool {
    let holes: Vec<Region> = rule
        .exclusions
        .iter()
        .map(|c| Region::from_clause(schema, c))
        .collect();
    nonempty_minus(&Region::from_clause(schema, &rule.clause), &holes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed(lo: f64, hi: f64) -> Interval {
        Interval {
            lo,
            lo_open: false,
            hi,
            hi_open: false,
        }
    }

    #[test]
    fn interval_basics() {
        let lt = Interval::from_op(Op::Lt, 5.0).unwrap();
        let ge = Interval::from_op(Op::Ge, 5.0).unwrap();
        assert!(lt.intersect(&ge).is_empty());
        let le = Interval::from_op(Op::Le, 5.0).unwrap();
        assert!(!le.intersect(&ge).is_empty());
        assert!(Interval::from_op(Op::Ne, 1.0).is_none());
        assert!(lt.contains(4.999) && !lt.contains(5.0));
    }

    #[test]
    fn interval_subtract_pieces() {
        let a = closed(0.0, 10.0);
        let b = Interval {
            lo: 3.0,
            lo_open: true,
            hi: 4.0,
            hi_open: false,
        };
        let parts = a.subtract(&b);
        assert_eq!(parts.len(), 2);
        assert!(parts[0].contains(3.0) && !parts[0].contains(3.5));
        assert!(parts[1].contains(4.5) && !parts[1].contains(4.0));
        assert!(a.subtract(&Interval::FULL).is_empty());
        assert_eq!(a.subtract(&closed(20.0, 30.0)), vec![a]);
        // x < 5 minus x <= 5 leaves nothing; x <= 5 minus x < 5 leaves the point.
        let lt = Interval::from_op(Op::Lt, 5.0).unwrap();
        let le = Interval::from_op(Op::Le, 5.0).unwrap();
        assert!(lt.subtract(&le).is_empty());
        assert_eq!(le.subtract(&lt), vec![Interval::point(5.0)]);
    }
}
