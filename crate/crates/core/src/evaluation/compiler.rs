//! Compile-and-run evaluation of real programs.
//!
//! A candidate is built as
//! `<cc> <rendered flags> <compile_extra> <sources> <link_extra> -o <bin>`,
//! then executed `repetitions` times, one process at a time. Each run's
//! stdout and declared output files are hashed and compared against the
//! plain `-O3` reference; any difference makes the candidate invalid.

use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wait_timeout::ChildExt;

use super::{mean, EvalError, Evaluator, Measurement, ReferenceResult, Status};
use crate::option_space::{Combination, GroupTable, BASE_LEVEL};

pub const DEFAULT_REPETITIONS: usize = 5;

/// Per-run timeout for candidates, as a multiple of the -O3 mean time.
const TIMEOUT_FACTOR: f64 = 10.0;
/// Lower bound on the derived candidate timeout, in seconds.
const MIN_TIMEOUT: f64 = 1.0;
/// Per-run timeout for the reference build when the manifest sets none.
const REFERENCE_TIMEOUT: f64 = 600.0;

/// Benchmark manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub sources: Vec<PathBuf>,
    #[serde(default)]
    pub compile_extra: Vec<String>,
    /// Tokens placed after the sources (libraries).
    #[serde(default)]
    pub link_extra: Vec<String>,
    /// Command template; `{bin}` is replaced by the built binary's path.
    pub run_command: Vec<String>,
    /// Files the program writes, hashed after stdout in this order.
    #[serde(default)]
    pub output_files: Vec<PathBuf>,
    /// Working directory for compiling and running. Relative to the manifest.
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    /// Per-run timeout in seconds. Defaults to 10x the -O3 time.
    #[serde(default)]
    pub timeout: Option<f64>,
}

impl BenchmarkSpec {
    /// Loads a manifest, resolving relative paths against its directory.
    pub fn from_path(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: BenchmarkSpec = serde_json::from_str(&text)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let workdir = match &spec.workdir {
            Some(w) if w.is_absolute() => w.clone(),
            Some(w) => base.join(w),
            None => base.to_path_buf(),
        };
        spec.workdir = Some(workdir);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid =
            |msg: &str| Err(io::Error::new(io::ErrorKind::InvalidInput, msg.to_string()).into());
        if self.sources.is_empty() {
            return invalid("benchmark manifest lists no sources");
        }
        if self.run_command.is_empty() {
            return invalid("benchmark manifest has an empty run_command");
        }
        if let Some(t) = self.timeout {
            if t.is_nan() || t <= 0.0 {
                return invalid("benchmark timeout must be positive");
            }
        }
        Ok(())
    }

    fn workdir(&self) -> PathBuf {
        self.workdir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Clone)]
pub struct CompilerOptions {
    pub cc: PathBuf,
    pub repetitions: usize,
    /// Pin benchmark runs to this CPU core (Linux only; ignored elsewhere).
    pub pin_core: Option<usize>,
}

impl Default for CompilerOptions {
    fn default() -> Self {
        Self {
            cc: PathBuf::from("gcc"),
            repetitions: DEFAULT_REPETITIONS,
            pin_core: None,
        }
    }
}

enum RunOutcome {
    Finished { seconds: f64, digest: String },
    Failed { seconds: f64 },
    TimedOut { seconds: f64 },
}

pub struct CompilerEvaluator {
    bench: BenchmarkSpec,
    table: GroupTable,
    options: CompilerOptions,
    build_dir: tempfile::TempDir,
    reference: Option<ReferenceResult>,
}

impl CompilerEvaluator {
    pub fn new(
        bench: BenchmarkSpec,
        table: GroupTable,
        options: CompilerOptions,
    ) -> Result<Self, EvalError> {
        bench.validate()?;
        if options.repetitions == 0 {
            return Err(
                io::Error::new(io::ErrorKind::InvalidInput, "repetitions must be >= 1").into(),
            );
        }
        if options.pin_core.is_some() && !cfg!(target_os = "linux") {
            warn!("--pin-core is not supported on this platform; runs will not be pinned");
        }
        Ok(Self {
            bench,
            table,
            options,
            build_dir: tempfile::Builder::new()
                .prefix("grouptune-build")
                .tempdir()?,
            reference: None,
        })
    }

    pub fn reference(&self) -> Option<&ReferenceResult> {
        self.reference.as_ref()
    }

    /// Installs a previously established reference.
    pub fn set_reference(&mut self, reference: ReferenceResult) {
        self.reference = Some(reference);
    }

    /// Builds with plain `-O3`, runs it, and records the output digest and
    /// mean time every candidate is judged against.
    pub fn establish_reference(&mut self) -> Result<ReferenceResult, EvalError> {
        let bin = self.build_dir.path().join("reference");
        let tokens = vec![BASE_LEVEL.to_string()];
        if !self.compile(&tokens, &bin)? {
            return Err(EvalError::ReferenceFailed(
                "benchmark does not compile under -O3".into(),
            ));
        }
        let timeout = self.bench.timeout.unwrap_or(REFERENCE_TIMEOUT);
        let mut runs = Vec::with_capacity(self.options.repetitions);
        let mut digest: Option<String> = None;
        for i in 0..self.options.repetitions {
            match self.run_once(&bin, timeout)? {
                RunOutcome::Finished { seconds, digest: d } => {
                    if let Some(prev) = &digest {
                        if *prev != d {
                            return Err(EvalError::ReferenceFailed(format!(
                                "-O3 output differs between runs (run {i})"
                            )));
                        }
                    }
                    digest = Some(d);
                    runs.push(seconds);
                }
                RunOutcome::Failed { .. } => {
                    return Err(EvalError::ReferenceFailed(format!("-O3 run {i} failed")))
                }
                RunOutcome::TimedOut { .. } => {
                    return Err(EvalError::ReferenceFailed(format!("-O3 run {i} timed out")))
                }
            }
        }
        let reference = ReferenceResult {
            output_digest: digest,
            perf_o3: mean(&runs),
        };
        self.reference = Some(reference.clone());
        Ok(reference)
    }

    /// Per-run timeout applied to candidates.
    pub fn candidate_timeout(&self) -> Option<f64> {
        self.bench.timeout.or_else(|| {
            self.reference
                .as_ref()
                .map(|r| (TIMEOUT_FACTOR * r.perf_o3).max(MIN_TIMEOUT))
        })
    }

    /// Compiles `tokens`; `Ok(false)` means the compiler rejected the build.
    fn compile(&self, tokens: &[String], bin: &Path) -> Result<bool, EvalError> {
        let _ = std::fs::remove_file(bin);
        let mut cmd = Command::new(&self.options.cc);
        cmd.args(tokens)
            .args(&self.bench.compile_extra)
            .args(&self.bench.sources)
            .args(&self.bench.link_extra)
            .arg("-o")
            .arg(bin)
            .current_dir(self.bench.workdir())
            .stdin(Stdio::null());
        let output = match cmd.output() {
            Ok(o) => o,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(EvalError::CompilerMissing(
                    self.options.cc.display().to_string(),
                ))
            }
            Err(e) => return Err(e.into()),
        };
        if !output.status.success() {
            debug!(
                "compile failed: {}",
                String::from_utf8_lossy(&output.stderr)
                    .lines()
                    .next()
                    .unwrap_or("")
            );
            return Ok(false);
        }
        Ok(bin.exists())
    }

    fn run_once(&self, bin: &Path, timeout: f64) -> Result<RunOutcome, EvalError> {
        let workdir = self.bench.workdir();
        for f in &self.bench.output_files {
            let _ = std::fs::remove_file(workdir.join(f));
        }
        let bin_str = bin.display().to_string();
        let argv: Vec<String> = self
            .bench
            .run_command
            .iter()
            .map(|a| a.replace("{bin}", &bin_str))
            .collect();
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(&workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        if let Some(core) = self.options.pin_core {
            pin_to_core(&mut cmd, core);
        }
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }

        let start = Instant::now();
        let mut child = cmd.spawn()?;
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let status = child.wait_timeout(Duration::from_secs_f64(timeout))?;
        let seconds = start.elapsed().as_secs_f64();
        let status = match status {
            Some(s) => s,
            None => {
                kill_tree(&mut child);
                let _ = child.wait();
                let _ = reader.join();
                return Ok(RunOutcome::TimedOut { seconds });
            }
        };
        let captured = reader
            .join()
            .map_err(|_| io::Error::other("stdout reader panicked"))??;
        if !status.success() {
            return Ok(RunOutcome::Failed { seconds });
        }

        let mut hasher = Sha256::new();
        hash_chunk(&mut hasher, &captured);
        for f in &self.bench.output_files {
            match std::fs::read(workdir.join(f)) {
                Ok(bytes) => hash_chunk(&mut hasher, &bytes),
                Err(_) => return Ok(RunOutcome::Failed { seconds }),
            }
        }
        Ok(RunOutcome::Finished {
            seconds,
            digest: hex::encode(hasher.finalize()),
        })
    }
}

/// Kills the run and anything it spawned; grandchildren holding the stdout
/// pipe would otherwise keep the reader blocked.
fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
}

impl Evaluator for CompilerEvaluator {
    fn evaluate(&mut self, comb: &Combination) -> Result<Measurement, EvalError> {
        let reference = self.reference.clone().ok_or(EvalError::NoReference)?;
        let timeout = self.candidate_timeout().expect("reference is set");
        let bin = self.build_dir.path().join("candidate");
        let tokens = self.table.render_flags(comb);
        if !self.compile(&tokens, &bin)? {
            return Ok(Measurement::invalid(Status::CompileError, Vec::new(), None));
        }
        let mut runs = Vec::with_capacity(self.options.repetitions);
        let mut last_digest = None;
        for _ in 0..self.options.repetitions {
            match self.run_once(&bin, timeout)? {
                RunOutcome::Finished { seconds, digest } => {
                    runs.push(seconds);
                    if reference.output_digest.as_deref() != Some(digest.as_str()) {
                        return Ok(Measurement::invalid(
                            Status::OutputMismatch,
                            runs,
                            Some(digest),
                        ));
                    }
                    last_digest = Some(digest);
                }
                RunOutcome::Failed { seconds } => {
                    runs.push(seconds);
                    return Ok(Measurement::invalid(Status::RuntimeError, runs, None));
                }
                RunOutcome::TimedOut { seconds } => {
                    runs.push(seconds);
                    return Ok(Measurement::invalid(Status::Timeout, runs, None));
                }
            }
        }
        Ok(Measurement::valid(runs, last_digest))
    }
}

/// Length-prefixed so that chunk boundaries are part of the digest.
fn hash_chunk(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(bytes);
}

#[cfg(target_os = "linux")]
fn pin_to_core(cmd: &mut Command, core: usize) {
    use std::os::unix::process::CommandExt;
    // SAFETY: only async-signal-safe libc calls between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(core, &mut set);
            if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
                return Err(io::Error::last_os_error());
            }
            Ok(())
        });
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_to_core(_cmd: &mut Command, _core: usize) {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_requires_sources_and_command() {
        let spec = BenchmarkSpec {
            sources: vec![],
            compile_extra: vec![],
            link_extra: vec![],
            run_command: vec!["{bin}".into()],
            output_files: vec![],
            workdir: None,
            timeout: None,
        };
        assert!(spec.validate().is_err());
        let spec = BenchmarkSpec {
            sources: vec!["a.c".into()],
            run_command: vec![],
            ..spec
        };
        assert!(spec.validate().is_err());
        let spec = BenchmarkSpec {
            run_command: vec!["{bin}".into()],
            timeout: Some(0.0),
            ..spec
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn chunk_boundaries_matter() {
        let digest = |chunks: &[&[u8]]| {
            let mut h = Sha256::new();
            for c in chunks {
                hash_chunk(&mut h, c);
            }
            hex::encode(h.finalize())
        };
        assert_ne!(digest(&[b"ab", b"c"]), digest(&[b"a", b"bc"]));
    }

    #[test]
    fn missing_compiler_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.c"), "int main(void){return 0;}").unwrap();
        let bench = BenchmarkSpec {
            sources: vec!["m.c".into()],
            compile_extra: vec![],
            link_extra: vec![],
            run_command: vec!["{bin}".into()],
            output_files: vec![],
            workdir: Some(dir.path().to_path_buf()),
            timeout: Some(5.0),
        };
        let options = CompilerOptions {
            cc: PathBuf::from("/nonexistent/grouptune-cc"),
            ..Default::default()
        };
        let mut eval = CompilerEvaluator::new(bench, GroupTable::shipped(), options).unwrap();
        assert!(matches!(
            eval.establish_reference(),
            Err(EvalError::CompilerMissing(_))
        ));
    }

    #[test]
    fn evaluate_requires_reference() {
        let dir = tempfile::tempdir().unwrap();
        let bench = BenchmarkSpec {
            sources: vec!["m.c".into()],
            compile_extra: vec![],
            link_extra: vec![],
            run_command: vec!["{bin}".into()],
            output_files: vec![],
            workdir: Some(dir.path().to_path_buf()),
            timeout: None,
        };
        let table = GroupTable::shipped();
        let comb = table.default_combination();
        let mut eval = CompilerEvaluator::new(bench, table, CompilerOptions::default()).unwrap();
        assert!(matches!(eval.evaluate(&comb), Err(EvalError::NoReference)));
        eval.set_reference(ReferenceResult {
            output_digest: None,
            perf_o3: 0.01,
        });
        assert_eq!(eval.candidate_timeout(), Some(MIN_TIMEOUT));
    }
}
