//! Working directory preparation for `explore` and `check`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// True for names the checker itself creates: `meta`, `p<id>.<kind>` with an
/// optional `.z` suffix, and the `.tmp`/`.old` side files of both.
fn is_checker_file(name: &str) -> bool {
    let name = name
        .strip_suffix(".tmp")
        .or_else(|| name.strip_suffix(".old"))
        .unwrap_or(name);
    if name == "meta" {
        return true;
    }
    let name = name.strip_suffix(".z").unwrap_or(name);
    let Some(rest) = name.strip_prefix('p') else {
        return false;
    };
    let Some((id, kind)) = rest.split_once('.') else {
        return false;
    };
    !id.is_empty()
        && id.bytes().all(|b| b.is_ascii_digit())
        && !kind.is_empty()
        && kind.bytes().all(|b| b.is_ascii_alphanumeric())
}

/// Makes sure `dir` is usable as a fresh working directory.
///
/// A non-empty directory is only cleared with `force`, and only when every
/// entry is a file the checker would have written; anything else is left
/// alone and reported.
pub fn prepare(dir: &Path, force: bool) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e).with_context(|| format!("cannot read {}", dir.display())),
    };
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !entry.file_type()?.is_file() || !is_checker_file(&name) {
            bail!(
                "{} contains `{name}`, which was not written by diskmc; refusing to clear it",
                dir.display()
            );
        }
        files.push(entry.path());
    }
    if files.is_empty() {
        return Ok(());
    }
    if !force {
        bail!("{} is not empty; pass --force to clear it", dir.display());
    }
    for f in files {
        fs::remove_file(&f).with_context(|| format!("cannot remove {}", f.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recognizes_checker_files() {
        for ok in ["meta", "meta.tmp", "p1.matrix", "p12.values.z", "p3.prob1.tmp", "p2.queue.old"] {
            assert!(is_checker_file(ok), "{ok}");
        }
        for bad in ["notes.txt", "p.matrix", "px.values", "p1", "p1.", "meta2", ".meta"] {
            assert!(!is_checker_file(bad), "{bad}");
        }
    }

    #[test]
    fn force_clears_only_checker_files() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("p1.matrix"), b"x").unwrap();
        assert!(prepare(tmp.path(), false).is_err());
        prepare(tmp.path(), true).unwrap();
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);

        fs::write(tmp.path().join("thesis.tex"), b"x").unwrap();
        assert!(prepare(tmp.path(), true).is_err());
        assert!(tmp.path().join("thesis.tex").exists());
    }
}
