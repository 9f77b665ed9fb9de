//! Strict reading of TOML tables: every problem is collected, unknown keys
//! are reported together with the closest valid key.

use toml::{Table, Value};

pub(crate) struct Issues {
    items: Vec<String>,
}

impl Issues {
    pub fn new() -> Self {
        Issues { items: Vec::new() }
    }

    pub fn push(&mut self, msg: impl Into<String>) {
        self.items.push(msg.into());
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn into_vec(self) -> Vec<String> {
        self.items
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Closest entry of `allowed` by edit distance, if reasonably close.
pub(crate) fn nearest<'a>(key: &str, allowed: &[&'a str]) -> Option<&'a str> {
    allowed
        .iter()
        .map(|&a| (strsim::levenshtein(&key.to_lowercase(), &a.to_lowercase()), a))
        .filter(|&(d, a)| d <= (a.len().max(key.len()) / 2).max(2))
        .min()
        .map(|(_, a)| a)
}

pub(crate) fn reject_unknown(table: &Table, allowed: &[&str], path: &str, issues: &mut Issues) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let msg = match nearest(key, allowed) {
                Some(n) => format!("unknown key `{}` (did you mean `{}`?)", join(path, key), join(path, n)),
                None => format!("unknown key `{}` (valid keys: {})", join(path, key), allowed.join(", ")),
            };
            issues.push(msg);
        }
    }
}

fn type_error(path: &str, key: &str, want: &str, got: &Value, issues: &mut Issues) {
    issues.push(format!("`{}` must be {want}, found {}", join(path, key), got.type_str()));
}

pub(crate) fn f64_of(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

pub(crate) fn opt_f64(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<f64> {
    let v = table.get(key)?;
    match f64_of(v) {
        Some(f) if f.is_finite() => Some(f),
        Some(_) => {
            issues.push(format!("`{}` must be finite", join(path, key)));
            None
        }
        None => {
            type_error(path, key, "a number", v, issues);
            None
        }
    }
}

pub(crate) fn req_f64(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<f64> {
    if !table.contains_key(key) {
        issues.push(format!("missing required key `{}`", join(path, key)));
        return None;
    }
    opt_f64(table, key, path, issues)
}

pub(crate) fn opt_int(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<i64> {
    let v = table.get(key)?;
    match v {
        Value::Integer(i) => Some(*i),
        _ => {
            type_error(path, key, "an integer", v, issues);
            None
        }
    }
}

pub(crate) fn opt_usize(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<usize> {
    let i = opt_int(table, key, path, issues)?;
    match usize::try_from(i) {
        Ok(u) => Some(u),
        Err(_) => {
            issues.push(format!("`{}` must be non-negative, found {i}", join(path, key)));
            None
        }
    }
}

pub(crate) fn req_usize(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<usize> {
    if !table.contains_key(key) {
        issues.push(format!("missing required key `{}`", join(path, key)));
        return None;
    }
    opt_usize(table, key, path, issues)
}

pub(crate) fn opt_str<'a>(table: &'a Table, key: &str, path: &str, issues: &mut Issues) -> Option<&'a str> {
    let v = table.get(key)?;
    match v {
        Value::String(s) => Some(s.as_str()),
        _ => {
            type_error(path, key, "a string", v, issues);
            None
        }
    }
}

pub(crate) fn req_str<'a>(table: &'a Table, key: &str, path: &str, issues: &mut Issues) -> Option<&'a str> {
    if !table.contains_key(key) {
        issues.push(format!("missing required key `{}`", join(path, key)));
        return None;
    }
    opt_str(table, key, path, issues)
}

pub(crate) fn opt_bool(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<bool> {
    let v = table.get(key)?;
    match v {
        Value::Boolean(b) => Some(*b),
        _ => {
            type_error(path, key, "a boolean", v, issues);
            None
        }
    }
}

pub(crate) fn opt_array<'a>(table: &'a Table, key: &str, path: &str, issues: &mut Issues) -> Option<&'a [Value]> {
    let v = table.get(key)?;
    match v {
        Value::Array(a) => Some(a.as_slice()),
        _ => {
            type_error(path, key, "an array", v, issues);
            None
        }
    }
}

pub(crate) fn opt_table<'a>(table: &'a Table, key: &str, path: &str, issues: &mut Issues) -> Option<&'a Table> {
    let v = table.get(key)?;
    match v {
        Value::Table(t) => Some(t),
        _ => {
            type_error(path, key, "a table", v, issues);
            None
        }
    }
}

pub(crate) fn f64_list(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<Vec<f64>> {
    let arr = opt_array(table, key, path, issues)?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, v) in arr.iter().enumerate() {
        match f64_of(v) {
            Some(f) if f.is_finite() => out.push(f),
            _ => {
                issues.push(format!("`{}[{i}]` must be a finite number", join(path, key)));
                return None;
            }
        }
    }
    Some(out)
}

pub(crate) fn int_list(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<Vec<i64>> {
    let arr = opt_array(table, key, path, issues)?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, v) in arr.iter().enumerate() {
        match v {
            Value::Integer(n) => out.push(*n),
            _ => {
                issues.push(format!("`{}[{i}]` must be an integer", join(path, key)));
                return None;
            }
        }
    }
    Some(out)
}

pub(crate) fn str_list(table: &Table, key: &str, path: &str, issues: &mut Issues) -> Option<Vec<String>> {
    let arr = opt_array(table, key, path, issues)?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, v) in arr.iter().enumerate() {
        match v {
            Value::String(s) => out.push(s.clone()),
            _ => {
                issues.push(format!("`{}[{i}]` must be a string", join(path, key)));
                return None;
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_suggest_nearest() {
        let t: Table = "betta = 1\nL = 4\nzzz = 2".parse().unwrap();
        let mut issues = Issues::new();
        reject_unknown(&t, &["beta", "L", "d"], "", &mut issues);
        let v = issues.into_vec();
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|m| m.contains("`betta`") && m.contains("`beta`")));
        assert!(v.iter().any(|m| m.contains("`zzz`") && m.contains("valid keys")));
    }

    #[test]
    fn typed_readers_collect_every_problem() {
        let t: Table = "a = \"x\"\nb = -3\nc = [1, 2.5]".parse().unwrap();
        let mut issues = Issues::new();
        assert_eq!(opt_f64(&t, "a", "sec", &mut issues), None);
        assert_eq!(opt_usize(&t, "b", "sec", &mut issues), None);
        assert_eq!(f64_list(&t, "c", "sec", &mut issues), Some(vec![1.0, 2.5]));
        assert_eq!(req_str(&t, "missing", "sec", &mut issues), None);
        let v = issues.into_vec();
        assert_eq!(v.len(), 3);
        assert!(v[0].contains("sec.a"));
        assert!(v[2].contains("missing required key `sec.missing`"));
    }
}
