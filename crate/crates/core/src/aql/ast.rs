use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub aggregate: String,
    pub argument: String,
    pub source: Source,
    pub predicate: Option<ValuePredicate>,
    pub shape: ShapeClause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Array(String),
    /// `between (array, lo..., hi...)`, both ends inclusive.
    Between {
        array: String,
        coords: Vec<i64>,
    },
}

impl Source {
    pub fn array(&self) -> &str {
        match self {
            Source::Array(name) | Source::Between { array: name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeClause {
    Grid {
        partitions: Vec<(String, i64)>,
    },
    Window {
        windows: Vec<WindowItem>,
        stride: Option<i64>,
    },
    Hierarchical(RingClause),
    Circular(RingClause),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowItem {
    pub dim: String,
    pub preceding: i64,
    pub following: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingClause {
    pub radius: i64,
    pub step: i64,
    pub mode: Option<RingMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RingMode {
    /// Ring k holds every cell within radius r_k.
    Nested,
    /// Ring k holds the cells with r_{k-1} < d <= r_k.
    Disjoint,
}

impl RingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RingMode::Nested => "nested",
            RingMode::Disjoint => "disjoint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nested" => Some(RingMode::Nested),
            "disjoint" => Some(RingMode::Disjoint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "<>",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "=" => Comparator::Eq,
            "<>" => Comparator::Ne,
            _ => return None,
        })
    }

    pub fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conjunct {
    pub attribute: String,
    pub comparator: Comparator,
    pub constant: f64,
}

/// Conjunction of comparisons between the cell value and numeric constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePredicate {
    pub conjuncts: Vec<Conjunct>,
}

impl ValuePredicate {
    pub fn matches(&self, value: f64) -> bool {
        self.conjuncts
            .iter()
            .all(|c| c.comparator.eval(value, c.constant))
    }
}

impl fmt::Display for ValuePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(
                f,
                "{} {} {}",
                c.attribute,
                c.comparator.as_str(),
                c.constant
            )?;
        }
        Ok(())
    }
}

/// Renders the query back to AQL text that parses to the same AST.
impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "select {}({}) from ", self.aggregate, self.argument)?;
        match &self.source {
            Source::Array(name) => f.write_str(name)?,
            Source::Between { array, coords } => {
                write!(f, "between ({array}")?;
                for c in coords {
                    write!(f, ", {c}")?;
                }
                f.write_str(")")?;
            }
        }
        if let Some(p) = &self.predicate {
            write!(f, " where {p}")?;
        }
        match &self.shape {
            ShapeClause::Grid { partitions } => {
                f.write_str(" grid as (partition by ")?;
                for (i, (dim, size)) in partitions.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{dim} {size}")?;
                }
                f.write_str(")")
            }
            ShapeClause::Window { windows, stride } => {
                f.write_str(" fixed window as (partition by ")?;
                for (i, w) in windows.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(
                        f,
                        "{} {} preceding and {} following",
                        w.dim, w.preceding, w.following
                    )?;
                }
                if let Some(s) = stride {
                    write!(f, " stride {s}")?;
                }
                f.write_str(")")
            }
            ShapeClause::Hierarchical(ring) => write_ring(f, "hierarchical", ring),
            ShapeClause::Circular(ring) => write_ring(f, "circular", ring),
        }
    }
}

fn write_ring(f: &mut fmt::Formatter<'_>, keyword: &str, ring: &RingClause) -> fmt::Result {
    write!(
        f,
        " {keyword} as (radius {} step {}",
        ring.radius, ring.step
    )?;
    if let Some(mode) = ring.mode {
        write!(f, " mode {}", mode.as_str())?;
    }
    f.write_str(")")
}
