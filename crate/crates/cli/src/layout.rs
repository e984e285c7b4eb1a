//! On-disk layout of a generated collaboration.
//!
//! ```text
//! <out>/private/              user-side data, never handed to the analyst
//!     PRIVATE                 marker
//!     scenario.json           the spec (its seed regenerates everything)
//!     anchor.dcm1
//!     class_means.dcm1
//!     user_<i>/x.dcm1 f.dcm1 e.dcm1 labels.json
//! <out>/analyst/              what the analyst receives
//!     user_<i>/x_tilde.dcm1 a_i.dcm1 labels.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dc_core::numkernels::io::{read_csv, read_dcm1, write_csv, write_dcm1};
use dc_core::protocol::{IntermediateBundle, Scenario, ScenarioSpec, UserPrivate};
use dc_core::{Error, Matrix};

pub const PRIVATE_DIR: &str = "private";
pub const ANALYST_DIR: &str = "analyst";

const PRIVATE_MARKER: &str = "Private user-side data. Nothing under this directory is shared with the analyst.\n";

pub fn user_dir(root: &Path, i: usize) -> PathBuf {
    root.join(format!("user_{i}"))
}

/// Creates `dir`, failing if the path exists as a non-directory.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists and is not a directory", dir.display()),
        ))
        .into());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Writes `m` as DCM1, plus a CSV mirror when `csv` is set.
pub fn save_matrix(path: &Path, m: &Matrix, csv: bool) -> Result<()> {
    write_dcm1(path, m).with_context(|| format!("writing {}", path.display()))?;
    if csv {
        let mirror = path.with_extension("csv");
        write_csv(&mirror, m).with_context(|| format!("writing {}", mirror.display()))?;
    }
    Ok(())
}

/// Reads a DCM1 file, or CSV when the extension is `.csv`.
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let m = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path)
    } else {
        read_dcm1(path)
    };
    m.with_context(|| format!("reading {}", path.display()))
}

pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_slice(&bytes)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

pub fn write_scenario(out: &Path, sc: &Scenario, bundles: &[IntermediateBundle], csv: bool) -> Result<()> {
    let private = out.join(PRIVATE_DIR);
    let analyst = out.join(ANALYST_DIR);
    ensure_dir(&private)?;
    ensure_dir(&analyst)?;
    fs::write(private.join("PRIVATE"), PRIVATE_MARKER)?;
    save_json(&private.join("scenario.json"), &sc.spec)?;
    save_matrix(&private.join("anchor.dcm1"), &sc.anchor, csv)?;
    save_matrix(&private.join("class_means.dcm1"), &sc.class_means, csv)?;
    for (i, (user, bundle)) in sc.users.iter().zip(bundles).enumerate() {
        let p = user_dir(&private, i);
        ensure_dir(&p)?;
        save_matrix(&p.join("x.dcm1"), &user.x, csv)?;
        save_matrix(&p.join("f.dcm1"), &user.f, csv)?;
        save_matrix(&p.join("e.dcm1"), &user.e, csv)?;
        save_json(&p.join("labels.json"), &user.labels)?;

        let a = user_dir(&analyst, i);
        ensure_dir(&a)?;
        save_matrix(&a.join("x_tilde.dcm1"), &bundle.x_tilde, csv)?;
        save_matrix(&a.join("a_i.dcm1"), &bundle.a_i, csv)?;
        save_json(&a.join("labels.json"), &bundle.labels)?;
    }
    Ok(())
}

/// Directory holding `user_<i>` bundle folders: `<dir>/analyst` if present, else `dir`.
pub fn analyst_root(dir: &Path) -> PathBuf {
    let nested = dir.join(ANALYST_DIR);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// Number of `user_<i>` folders, which must be numbered `0..c` without gaps.
fn user_count(root: &Path) -> Result<usize> {
    let entries = fs::read_dir(root)
        .map_err(Error::from)
        .with_context(|| format!("listing {}", root.display()))?;
    let mut idx = Vec::new();
    for entry in entries {
        let name = entry.map_err(Error::from)?.file_name();
        if let Some(n) = name
            .to_str()
            .and_then(|s| s.strip_prefix("user_"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            idx.push(n);
        }
    }
    idx.sort_unstable();
    if idx.is_empty() {
        return Err(Error::Validation(format!("no user_<i> directories under {}", root.display())).into());
    }
    if let Some(missing) = (0..idx.len()).find(|&i| idx[i] != i) {
        return Err(Error::Validation(format!(
            "user {missing}: bundle directory missing under {}",
            root.display()
        ))
        .into());
    }
    Ok(idx.len())
}

fn require(path: PathBuf, user: usize) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Err(Error::Validation(format!("user {user}: missing {name} ({})", path.display())).into())
    }
}

pub fn load_bundles(dir: &Path) -> Result<Vec<IntermediateBundle>> {
    let root = analyst_root(dir);
    let c = user_count(&root)?;
    let mut out = Vec::with_capacity(c);
    for i in 0..c {
        let d = user_dir(&root, i);
        let x_tilde = load_matrix(&require(d.join("x_tilde.dcm1"), i)?)?;
        let a_i = load_matrix(&require(d.join("a_i.dcm1"), i)?)?;
        let labels: Vec<usize> = load_json(&require(d.join("labels.json"), i)?)?;
        if labels.len() != x_tilde.rows() {
            return Err(
                Error::Validation(format!("user {i}: {} labels for {} rows", labels.len(), x_tilde.rows())).into(),
            );
        }
        out.push(IntermediateBundle { x_tilde, a_i, labels });
    }
    let shape = out[0].a_i.shape();
    for (i, b) in out.iter().enumerate() {
        if b.a_i.shape() != shape || b.x_tilde.cols() != shape.1 {
            return Err(Error::Validation(format!(
                "user {i}: bundle shapes x_tilde {:?}, a_i {:?} incompatible with user 0's a_i {:?}",
                b.x_tilde.shape(),
                b.a_i.shape(),
                shape
            ))
            .into());
        }
    }
    Ok(out)
}

pub struct PrivateData {
    pub spec: ScenarioSpec,
    pub anchor: Matrix,
    pub users: Vec<UserPrivate>,
}

pub fn load_private(dir: &Path) -> Result<PrivateData> {
    let root = dir.join(PRIVATE_DIR);
    if !root.is_dir() {
        return Err(Error::Validation(format!("{} has no private/ directory", dir.display())).into());
    }
    let spec: ScenarioSpec = load_json(&root.join("scenario.json"))?;
    let anchor = load_matrix(&root.join("anchor.dcm1"))?;
    let c = user_count(&root)?;
    let mut users = Vec::with_capacity(c);
    for i in 0..c {
        let d = user_dir(&root, i);
        users.push(UserPrivate {
            x: load_matrix(&require(d.join("x.dcm1"), i)?)?,
            labels: load_json(&require(d.join("labels.json"), i)?)?,
            f: load_matrix(&require(d.join("f.dcm1"), i)?)?,
            e: load_matrix(&require(d.join("e.dcm1"), i)?)?,
        });
    }
    Ok(PrivateData { spec, anchor, users })
}
