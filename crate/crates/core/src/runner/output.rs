//! Text artifacts: CSV tables, moment files, atomic writes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::cumulant::TableMoments;
use crate::numeric::fmt_f64;
use crate::C64;

/// Versions of the library's modules, recorded in every artifact.
pub fn module_versions() -> Vec<(&'static str, &'static str)> {
    let v = env!("CARGO_PKG_VERSION");
    vec![
        ("partition-lattice", v),
        ("cumulant-engine", v),
        ("spin-lattice-sim", v),
        ("clustering-harness", v),
        ("cli-io", v),
    ]
}

/// A CSV table whose cells are already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Csv { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Header row, then a comment line with the configuration hash and
    /// module versions, then the data.
    pub fn render(&self, config_hash: &str) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        let versions: Vec<String> = module_versions().iter().map(|(m, v)| format!("{m}={v}")).collect();
        out.push_str(&format!("# config_sha256={config_hash} {}\n", versions.join(" ")));
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

/// `re, im, abs` cells of a complex value.
pub fn complex_cells(z: C64) -> [String; 3] {
    [fmt_f64(z.re), fmt_f64(z.im), fmt_f64(z.norm())]
}

/// Writes every file or none: contents go to temporary siblings first and
/// are renamed into place only once all of them are on disk.
pub fn write_atomic(files: &[(PathBuf, String)]) -> io::Result<()> {
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(files.len());
    let result = (|| {
        for (path, contents) in files {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            fs::create_dir_all(dir)?;
            let name = path
                .file_name()
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("{} has no file name", path.display())))?;
            let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
            let mut file = fs::File::create(&tmp)?;
            staged.push((tmp.clone(), path.clone()));
            file.write_all(contents.as_bytes())?;
            file.sync_all()?;
        }
        for (placed, (tmp, path)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, path) {
                // withdraw the files already moved into place
                for (_, done) in &staged[..placed] {
                    let _ = fs::remove_file(done);
                }
                return Err(e);
            }
        }
        Ok(())
    })();
    if result.is_err() {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}

/// Parses `i1,i2,...: re,im` lines with 1-based indices; `#` starts a
/// comment. All malformed lines are reported.
pub fn parse_moments(text: &str) -> Result<TableMoments, Vec<String>> {
    let mut table = TableMoments::new(0);
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = lineno + 1;
        let Some((lhs, rhs)) = line.split_once(':') else {
            errors.push(format!("line {at}: expected `i1,i2,...: re,im`"));
            continue;
        };
        let indices: Result<Vec<usize>, String> = lhs
            .split(',')
            .map(|s| match s.trim().parse::<usize>() {
                Ok(0) => Err("indices are 1-based".to_string()),
                Ok(i) => Ok(i - 1),
                Err(_) => Err(format!("bad index `{}`", s.trim())),
            })
            .collect();
        let parts: Vec<&str> = rhs.split(',').map(str::trim).collect();
        let value = match parts.as_slice() {
            [re, im] => match (re.parse::<f64>(), im.parse::<f64>()) {
                (Ok(re), Ok(im)) if re.is_finite() && im.is_finite() => Ok(C64::new(re, im)),
                _ => Err(format!("bad value `{}`", rhs.trim())),
            },
            [re] => re.parse::<f64>().ok().filter(|r| r.is_finite()).map(|r| C64::new(r, 0.0)).ok_or(format!("bad value `{re}`")),
            _ => Err(format!("bad value `{}`", rhs.trim())),
        };
        match (indices, value) {
            (Ok(idx), Ok(v)) => {
                if table.iter().any(|(k, _)| *k == idx) {
                    errors.push(format!("line {at}: duplicate entry for `{}`", lhs.trim()));
                }
                table.insert(idx, v);
            }
            (Err(e), _) | (_, Err(e)) => errors.push(format!("line {at}: {e}")),
        }
    }
    if errors.is_empty() {
        Ok(table)
    } else {
        Err(errors)
    }
}

/// Formats `(0-based tuple, value)` pairs in the moments-file syntax.
pub fn format_values<'a>(entries: impl IntoIterator<Item = (&'a Vec<usize>, &'a C64)>) -> String {
    let mut out = String::new();
    for (idx, v) in entries {
        let idx: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
        out.push_str(&format!("{}: {},{}\n", idx.join(","), fmt_f64(v.re), fmt_f64(v.im)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::MomentProvider;

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["z", "re"]);
        csv.push(vec!["1".into(), f(0.5)]);
        let text = csv.render("abc");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z,re");
        assert!(lines[1].starts_with("# config_sha256=abc partition-lattice="));
        assert_eq!(lines[2], "1,5.0000000000000000e-1");
    }

    #[test]
    fn moments_round_trip() {
        let text = "# two observables\n1: 0.5,0\n2: -1,0.25\n1,2: 3e-1,-2\n";
        let table = parse_moments(text).unwrap();
        assert_eq!(table.arity(), 2);
        assert_eq!(table.moment(&[0, 1]).unwrap(), C64::new(0.3, -2.0));
        let mut entries: Vec<_> = table.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let again = parse_moments(&format_values(entries)).unwrap();
        assert_eq!(again.moment(&[1]).unwrap(), C64::new(-1.0, 0.25));
    }

    #[test]
    fn moments_errors_are_collected() {
        let errs = parse_moments("0: 1,0\n1 2\n1: x,0\n1: 1,0\n1: 2,0\n").unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
        assert!(errs[0].contains("1-based"));
    }

    #[test]
    fn atomic_write_leaves_nothing_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("a.csv");
        // a directory in place of the second target makes the rename fail
        let blocked = dir.path().join("b.csv");
        fs::create_dir(&blocked).unwrap();
        fs::write(blocked.join("keep"), "x").unwrap();
        let res = write_atomic(&[(good.clone(), "1\n".into()), (blocked.clone(), "2\n".into())]);
        assert!(res.is_err());
        let names: Vec<String> =
            fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        assert_eq!(names, vec!["b.csv".to_string()]);
        write_atomic(&[(good.clone(), "1\n".into())]).unwrap();
        assert_eq!(fs::read_to_string(good).unwrap(), "1\n");
    }
}
