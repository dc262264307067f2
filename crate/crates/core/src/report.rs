use std::fmt;

/// Outcome of an identity check: how many instances were tested and the
/// counterexamples found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    name: String,
    checked: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

/// Failures beyond this count are tallied but not described.
const MAX_RECORDED_FAILURES: usize = 16;

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            checked: 0,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records one instance; `describe` runs only on failure.
    pub fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            if self.failures.len() < MAX_RECORDED_FAILURES {
                self.failures.push(describe());
            } else if self.failures.len() == MAX_RECORDED_FAILURES {
                self.failures.push("further failures omitted".into());
            }
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checked += other.checked;
        self.failures.extend(other.failures);
        self.notes.extend(other.notes);
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn checked(&self) -> usize {
        self.checked
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok" } else { "FAILED" };
        write!(f, "{}: {status} ({} checks", self.name, self.checked)?;
        if !self.failures.is_empty() {
            write!(f, ", {} failures", self.failures.len())?;
        }
        write!(f, ")")?;
        for failure in &self.failures {
            write!(f, "\n  - {failure}")?;
        }
        Ok(())
    }
}
