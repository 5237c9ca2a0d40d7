//! Projects, versions and checks persisted as a directory tree
//! `<root>/<project>/<version>/<check>/`.
//!
//! Every file is replaced by rename, so a reader never sees a half-written
//! record. A check's status and bundle reference live in the same file and
//! change together.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use hypercex_core::formula::parse_formula;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{self, is_aiger, Outcome, PipelineError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("check {0} is already running")]
    Busy(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("storage: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt record {path}: {detail}")]
    Corrupt { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Unchecked,
    PassBounded,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub error: String,
    pub detail: String,
}

impl From<&PipelineError> for ErrorInfo {
    fn from(e: &PipelineError) -> Self {
        ErrorInfo { error: e.kind().to_string(), detail: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub formula_text: String,
    pub status: Status,
    /// Bound of the last successful search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<ErrorInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Version {
    pub id: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub machine_source: String,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub name: String,
    pub versions: Vec<Version>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: String,
    pub name: String,
    pub versions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProjectFile {
    id: String,
    name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VersionFile {
    id: String,
    timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CheckFile {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bundle_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    last_error: Option<ErrorInfo>,
}

impl From<&Check> for CheckFile {
    fn from(c: &Check) -> Self {
        CheckFile {
            id: c.id.clone(),
            name: c.name.clone(),
            status: c.status,
            bound: c.bound,
            bundle_ref: c.bundle_ref.clone(),
            last_error: c.last_error.clone(),
        }
    }
}

const BUNDLE: &str = "bundle.json";
const FORMULA: &str = "formula.hltl";

fn machine_file(source: &str) -> &'static str {
    if is_aiger(source) {
        "machine.aag"
    } else {
        "machine.json"
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true)
}

/// Numeric part of an id such as `v12`.
fn serial(id: &str) -> u64 {
    id.get(1..).and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("file inside a directory");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("record serializes");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), detail: e.to_string() })
}

fn subdirs(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        if entry.file_type()?.is_dir() && !name.to_string_lossy().starts_with('.') {
            out.push(entry.path());
        }
    }
    out.sort_by_key(|p| serial(&p.file_name().unwrap_or_default().to_string_lossy()));
    Ok(out)
}

#[derive(Debug, Default)]
struct Inner {
    projects: Vec<Project>,
    next: [u64; 3],
}

impl Inner {
    fn fresh(&mut self, kind: usize) -> String {
        self.next[kind] += 1;
        format!("{}{}", ["p", "v", "c"][kind], self.next[kind])
    }

    fn project(&self, pid: &str) -> Result<&Project, StoreError> {
        self.projects.iter().find(|p| p.id == pid).ok_or_else(|| StoreError::NotFound(format!("project {pid}")))
    }

    /// (project, version) indices of a version id.
    fn locate_version(&self, vid: &str) -> Result<(usize, usize), StoreError> {
        for (pi, p) in self.projects.iter().enumerate() {
            if let Some(vi) = p.versions.iter().position(|v| v.id == vid) {
                return Ok((pi, vi));
            }
        }
        Err(StoreError::NotFound(format!("version {vid}")))
    }

    /// (project, version, check) indices of a check id.
    fn locate_check(&self, cid: &str) -> Result<(usize, usize, usize), StoreError> {
        for (pi, p) in self.projects.iter().enumerate() {
            for (vi, v) in p.versions.iter().enumerate() {
                if let Some(ci) = v.checks.iter().position(|c| c.id == cid) {
                    return Ok((pi, vi, ci));
                }
            }
        }
        Err(StoreError::NotFound(format!("check {cid}")))
    }
}

pub struct Store {
    root: PathBuf,
    inner: Mutex<Inner>,
    running: Mutex<HashSet<String>>,
}

/// Exclusive right to run one check; released when dropped.
pub struct RunSlot<'a> {
    store: &'a Store,
    id: String,
}

impl Drop for RunSlot<'_> {
    fn drop(&mut self) {
        self.store.running.lock().expect("run set").remove(&self.id);
    }
}

impl Store {
    /// Opens or creates a store rooted at `root`, loading every record.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut inner = Inner::default();
        for pdir in subdirs(&root)? {
            let pf: ProjectFile = read_json(&pdir.join("project.json"))?;
            inner.next[0] = inner.next[0].max(serial(&pf.id));
            let mut versions = Vec::new();
            for vdir in subdirs(&pdir)? {
                let vf: VersionFile = read_json(&vdir.join("version.json"))?;
                inner.next[1] = inner.next[1].max(serial(&vf.id));
                let machine =
                    ["machine.json", "machine.aag"].iter().map(|n| vdir.join(n)).find(|p| p.exists()).ok_or_else(
                        || StoreError::Corrupt { path: vdir.display().to_string(), detail: "no machine file".into() },
                    )?;
                let machine_source = fs::read_to_string(machine)?;
                let mut checks = Vec::new();
                for cdir in subdirs(&vdir)? {
                    let cf: CheckFile = read_json(&cdir.join("check.json"))?;
                    inner.next[2] = inner.next[2].max(serial(&cf.id));
                    checks.push(Check {
                        id: cf.id,
                        name: cf.name,
                        formula_text: fs::read_to_string(cdir.join(FORMULA))?,
                        status: cf.status,
                        bound: cf.bound,
                        bundle_ref: cf.bundle_ref,
                        last_error: cf.last_error,
                    });
                }
                versions.push(Version {
                    id: vf.id,
                    timestamp: vf.timestamp,
                    tag: vf.tag,
                    parent: vf.parent,
                    machine_source,
                    checks,
                });
            }
            versions.sort_by(|a, b| (&a.timestamp, serial(&a.id)).cmp(&(&b.timestamp, serial(&b.id))));
            inner.projects.push(Project { id: pf.id, name: pf.name, versions });
        }
        info!("opened store at {} with {} projects", root.display(), inner.projects.len());
        Ok(Store { root, inner: Mutex::new(inner), running: Mutex::new(HashSet::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().expect("store lock")
    }

    fn check_dir(&self, pid: &str, vid: &str, cid: &str) -> PathBuf {
        self.root.join(pid).join(vid).join(cid)
    }

    /// Writes a whole version directory under a hidden name and renames it
    /// into place.
    fn write_version(&self, pid: &str, v: &Version, bundles: &[(String, Vec<u8>)]) -> Result<(), StoreError> {
        let pdir = self.root.join(pid);
        let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(&pdir)?;
        let vdir = staging.path();
        write_json(
            &vdir.join("version.json"),
            &VersionFile {
                id: v.id.clone(),
                timestamp: v.timestamp.clone(),
                tag: v.tag.clone(),
                parent: v.parent.clone(),
            },
        )?;
        fs::write(vdir.join(machine_file(&v.machine_source)), &v.machine_source)?;
        for c in &v.checks {
            let cdir = vdir.join(&c.id);
            fs::create_dir(&cdir)?;
            fs::write(cdir.join(FORMULA), &c.formula_text)?;
            if let Some((_, bytes)) = bundles.iter().find(|(id, _)| *id == c.id) {
                fs::write(cdir.join(BUNDLE), bytes)?;
            }
            write_json(&cdir.join("check.json"), &CheckFile::from(c))?;
        }
        let staged = staging.keep();
        fs::rename(&staged, pdir.join(&v.id))?;
        Ok(())
    }

    pub fn list_projects(&self) -> Vec<ProjectSummary> {
        self.lock()
            .projects
            .iter()
            .map(|p| ProjectSummary {
                id: p.id.clone(),
                name: p.name.clone(),
                versions: p.versions.iter().map(|v| v.id.clone()).collect(),
            })
            .collect()
    }

    pub fn project(&self, pid: &str) -> Result<Project, StoreError> {
        self.lock().project(pid).cloned()
    }

    pub fn versions(&self, pid: &str) -> Result<Vec<Version>, StoreError> {
        Ok(self.lock().project(pid)?.versions.clone())
    }

    pub fn version(&self, vid: &str) -> Result<Version, StoreError> {
        let inner = self.lock();
        let (pi, vi) = inner.locate_version(vid)?;
        Ok(inner.projects[pi].versions[vi].clone())
    }

    pub fn check(&self, cid: &str) -> Result<Check, StoreError> {
        let inner = self.lock();
        let (pi, vi, ci) = inner.locate_check(cid)?;
        Ok(inner.projects[pi].versions[vi].checks[ci].clone())
    }

    /// Creates a project whose first version holds `machine_source`, which
    /// must load.
    pub fn create_project(&self, name: &str, machine_source: &str) -> Result<Project, StoreError> {
        pipeline::load_system(machine_source)?;
        let mut inner = self.lock();
        let pid = inner.fresh(0);
        let vid = inner.fresh(1);
        let version = Version {
            id: vid,
            timestamp: now(),
            tag: None,
            parent: None,
            machine_source: machine_source.to_string(),
            checks: Vec::new(),
        };
        let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(&self.root)?;
        write_json(&staging.path().join("project.json"), &ProjectFile { id: pid.clone(), name: name.to_string() })?;
        let staged = staging.keep();
        fs::rename(&staged, self.root.join(&pid))?;
        self.write_version(&pid, &version, &[])?;
        let project = Project { id: pid, name: name.to_string(), versions: vec![version] };
        inner.projects.push(project.clone());
        Ok(project)
    }

    /// Adds an unchecked check to an existing version. The formula is parsed
    /// when the check runs.
    pub fn add_check(&self, pid: &str, vid: &str, name: Option<&str>, formula_text: &str) -> Result<Check, StoreError> {
        let mut inner = self.lock();
        let (pi, vi) = inner.locate_version(vid)?;
        if inner.projects[pi].id != pid {
            return Err(StoreError::NotFound(format!("version {vid} in project {pid}")));
        }
        let check = Check {
            id: inner.fresh(2),
            name: name.map(str::to_string),
            formula_text: formula_text.to_string(),
            status: Status::Unchecked,
            bound: None,
            bundle_ref: None,
            last_error: None,
        };
        let cdir = self.check_dir(pid, vid, &check.id);
        let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(self.root.join(pid).join(vid))?;
        fs::write(staging.path().join(FORMULA), formula_text)?;
        write_json(&staging.path().join("check.json"), &CheckFile::from(&check))?;
        let staged = staging.keep();
        fs::rename(&staged, &cdir)?;
        inner.projects[pi].versions[vi].checks.push(check.clone());
        Ok(check)
    }

    /// Reserves the run slot of `cid`, failing if a run is in progress.
    pub fn reserve(&self, cid: &str) -> Result<RunSlot<'_>, StoreError> {
        if !self.running.lock().expect("run set").insert(cid.to_string()) {
            return Err(StoreError::Busy(cid.to_string()));
        }
        Ok(RunSlot { store: self, id: cid.to_string() })
    }

    /// Runs the pipeline for a check. On error the failure is recorded on
    /// the check and everything else is left as it was.
    pub fn run_check(&self, cid: &str, bound: usize) -> Result<Check, StoreError> {
        let _slot = self.reserve(cid)?;
        let (pid, vid, formula, machine) = {
            let inner = self.lock();
            let (pi, vi, ci) = inner.locate_check(cid)?;
            let (p, v) = (&inner.projects[pi], &inner.projects[pi].versions[vi]);
            (p.id.clone(), v.id.clone(), v.checks[ci].formula_text.clone(), v.machine_source.clone())
        };
        let outcome = pipeline::check_sources(&machine, &formula, bound);

        let mut inner = self.lock();
        let (pi, vi, ci) = inner.locate_check(cid)?;
        let mut updated = inner.projects[pi].versions[vi].checks[ci].clone();
        let cdir = self.check_dir(&pid, &vid, cid);
        let result = match outcome {
            Ok(Outcome::PassBounded(b)) => {
                updated.status = Status::PassBounded;
                updated.bound = Some(b);
                updated.bundle_ref = None;
                updated.last_error = None;
                Ok(())
            }
            Ok(Outcome::Fail(bundle)) => {
                write_atomic(&cdir.join(BUNDLE), bundle.to_json().as_bytes())?;
                updated.status = Status::Fail;
                updated.bound = Some(bound);
                updated.bundle_ref = Some(format!("{pid}/{vid}/{cid}/{BUNDLE}"));
                updated.last_error = None;
                Ok(())
            }
            Err(e) => {
                warn!("check {cid} failed: {e}");
                updated.last_error = Some(ErrorInfo::from(&e));
                Err(e)
            }
        };
        write_json(&cdir.join("check.json"), &CheckFile::from(&updated))?;
        if updated.bundle_ref.is_none() {
            match fs::remove_file(cdir.join(BUNDLE)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
        }
        inner.projects[pi].versions[vi].checks[ci] = updated.clone();
        result.map(|()| updated).map_err(StoreError::from)
    }

    /// Raw bytes of a failed check's bundle.
    pub fn bundle(&self, cid: &str) -> Result<Vec<u8>, StoreError> {
        let check = self.check(cid)?;
        let Some(r) = check.bundle_ref else {
            return Err(StoreError::NotFound(format!("bundle of check {cid}")));
        };
        Ok(fs::read(self.root.join(r))?)
    }

    /// Clones the version holding `cid` into a new version in which that
    /// check's formula is `new_text`. Fails without touching the store when
    /// the formula does not parse.
    pub fn edit_formula(&self, cid: &str, new_text: &str) -> Result<Version, StoreError> {
        parse_formula(new_text).map_err(PipelineError::from)?;
        let mut inner = self.lock();
        let (pi, vi, _) = inner.locate_check(cid)?;
        let old = inner.projects[pi].versions[vi].clone();
        let pid = inner.projects[pi].id.clone();
        let mut version = Version {
            id: inner.fresh(1),
            timestamp: now(),
            tag: None,
            parent: Some(old.id.clone()),
            machine_source: old.machine_source.clone(),
            checks: Vec::new(),
        };
        let mut bundles = Vec::new();
        for c in &old.checks {
            let mut copy = c.clone();
            copy.id = inner.fresh(2);
            if c.id == cid {
                copy.formula_text = new_text.to_string();
                copy.status = Status::Unchecked;
                copy.bound = None;
                copy.bundle_ref = None;
                copy.last_error = None;
            } else if c.bundle_ref.is_some() {
                bundles.push((copy.id.clone(), fs::read(self.check_dir(&pid, &old.id, &c.id).join(BUNDLE))?));
                copy.bundle_ref = Some(format!("{pid}/{}/{}/{BUNDLE}", version.id, copy.id));
            }
            version.checks.push(copy);
        }
        self.write_version(&pid, &version, &bundles)?;
        inner.projects[pi].versions.push(version.clone());
        Ok(version)
    }

    pub fn tag_version(&self, vid: &str, tag: &str) -> Result<Version, StoreError> {
        let mut inner = self.lock();
        let (pi, vi) = inner.locate_version(vid)?;
        let pid = inner.projects[pi].id.clone();
        let v = &mut inner.projects[pi].versions[vi];
        let file = VersionFile {
            id: v.id.clone(),
            timestamp: v.timestamp.clone(),
            tag: Some(tag.to_string()),
            parent: v.parent.clone(),
        };
        write_json(&self.root.join(pid).join(vid).join("version.json"), &file)?;
        v.tag = Some(tag.to_string());
        Ok(v.clone())
    }
}
