use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// A finite semigroup given by its operation table.
///
/// CSV layout: a header row with the element names, followed by an `n x n`
/// body whose cell `(i, j)` names the product `i . j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTable {
    name: String,
    names: Vec<String>,
    table: Vec<usize>,
}

impl FiniteTable {
    /// Builds a table and checks closure and associativity by exhaustion.
    pub fn new(name: impl Into<String>, names: Vec<String>, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty operation table".into()));
        }
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("operation table must be {n}x{n}")));
        }
        if table.iter().flatten().any(|&v| v >= n) {
            return Err(Error::InvalidInput("operation table is not closed".into()));
        }
        let t = FiniteTable {
            name: name.into(),
            names,
            table: table.into_iter().flatten().collect(),
        };
        if let Some((a, b, c)) = t.associativity_witness() {
            return Err(Error::InvalidInput(format!(
                "operation table is not associative at ({}, {}, {})",
                t.names[a], t.names[b], t.names[c]
            )));
        }
        Ok(t)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    #[inline]
    pub fn op(&self, a: usize, b: usize) -> usize {
        self.table[a * self.len() + b]
    }

    pub fn identity(&self) -> Option<usize> {
        let n = self.len();
        (0..n).find(|&e| (0..n).all(|g| self.op(e, g) == g && self.op(g, e) == g))
    }

    pub fn is_commutative(&self) -> bool {
        self.commutativity_witness().is_none()
    }

    pub fn commutativity_witness(&self) -> Option<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .find(|&(a, b)| self.op(a, b) != self.op(b, a))
    }

    fn associativity_witness(&self) -> Option<(usize, usize, usize)> {
        let n = self.len();
        for a in 0..n {
            for b in 0..n {
                let ab = self.op(a, b);
                for c in 0..n {
                    if self.op(ab, c) != self.op(a, self.op(b, c)) {
                        return Some((a, b, c));
                    }
                }
            }
        }
        None
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("cannot open table {}: {e}", path.display())))?;
        Self::from_csv_reader(path.display().to_string(), file)
    }

    pub fn from_csv_reader(name: impl Into<String>, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let index = |cell: &str| {
            names
                .iter()
                .position(|n| n == cell)
                .ok_or_else(|| Error::InvalidInput(format!("unknown element `{cell}` in table body")))
        };
        let mut table = Vec::with_capacity(names.len());
        for record in rdr.records() {
            let record = record?;
            table.push(record.iter().map(index).collect::<Result<Vec<_>>>()?);
        }
        Self::new(name, names, table)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for a in 0..self.len() {
            let row: Vec<&str> = (0..self.len()).map(|b| self.names[self.op(a, b)].as_str()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Cyclic group `Z_n` under addition mod `n`.
    pub fn cyclic(n: usize) -> Self {
        let names = (0..n).map(|i| i.to_string()).collect();
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::new(format!("cyclic{n}"), names, table).expect("cyclic table is a group")
    }

    /// `{0, ..., m}` with `s . t = min(s + t, m)`.
    pub fn truncated_addition(m: usize) -> Self {
        let names = (0..=m).map(|i| i.to_string()).collect();
        let table = (0..=m).map(|a| (0..=m).map(|b| (a + b).min(m)).collect()).collect();
        Self::new(format!("truncadd{m}"), names, table).expect("truncated addition is associative")
    }

    /// `{0, ..., n, inf}` with `s . t = s + t` when that is at most `n` and
    /// `inf` otherwise; `inf` is absorbing.
    pub fn truncated_zbar(n: usize) -> Self {
        let inf = n + 1;
        let mut names: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
        names.push("inf".to_string());
        let table = (0..=inf)
            .map(|a| {
                (0..=inf)
                    .map(|b| if a == inf || b == inf || a + b > n { inf } else { a + b })
                    .collect()
            })
            .collect();
        Self::new(format!("trunczbar{n}"), names, table).expect("truncated zbar is associative")
    }

    /// Resolves the built-in names `cyclic<n>`, `truncadd<m>` and `trunczbar<n>`.
    pub fn builtin(name: &str) -> Option<Self> {
        let parse = |prefix: &str| name.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok());
        if let Some(n) = parse("cyclic").filter(|&n| n > 0) {
            Some(Self::cyclic(n))
        } else if let Some(m) = parse("truncadd") {
            Some(Self::truncated_addition(m))
        } else {
            parse("trunczbar").map(Self::truncated_zbar)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let t = FiniteTable::truncated_zbar(3);
        let back = FiniteTable::from_csv_reader("trunczbar3", t.to_csv_string().as_bytes()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn parses_handwritten_table() {
        let csv = "e,a\ne,a\na,e\n";
        let t = FiniteTable::from_csv_reader("z2", csv.as_bytes()).unwrap();
        assert_eq!(t.identity(), Some(0));
        assert_eq!(t.op(1, 1), 0);
        assert!(t.is_commutative());
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(FiniteTable::from_csv_reader("x", "a,b\na,c\nb,a\n".as_bytes()).is_err());
        assert!(FiniteTable::from_csv_reader("x", "a,b\na,b\n".as_bytes()).is_err());
        // Z_2 with `a` as identity is fine; the second table fails ((aa)b != a(ab)).
        assert!(FiniteTable::from_csv_reader("x", "a,b\na,b\nb,a\n".as_bytes()).is_ok());
        assert!(FiniteTable::from_csv_reader("x", "a,b\nb,b\nb,a\n".as_bytes()).is_err());
    }

    #[test]
    fn builtins() {
        assert_eq!(FiniteTable::builtin("cyclic5").unwrap().len(), 5);
        assert_eq!(FiniteTable::builtin("truncadd4").unwrap().len(), 5);
        assert_eq!(FiniteTable::builtin("trunczbar4").unwrap().len(), 6);
        assert!(FiniteTable::builtin("cyclic0").is_none());
        assert!(FiniteTable::builtin("nope").is_none());
    }
}
