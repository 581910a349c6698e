use std::fmt;

use serde::Serialize;

use crate::topology::NodeCoord;

/// Router input port. Network ports are named after the side the flit
/// arrives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    North,
    East,
    South,
    West,
    Local,
}

impl Port {
    pub(crate) fn from_index(i: usize) -> Port {
        match i {
            0 => Port::North,
            1 => Port::East,
            2 => Port::South,
            3 => Port::West,
            _ => Port::Local,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VcLocation {
    pub node: NodeCoord,
    pub port: Port,
    pub vc: usize,
    /// Message owning the front flit, if any.
    pub message: Option<u64>,
}

impl fmt::Display for VcLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?} vc{}", self.node, self.port, self.vc)?;
        if let Some(m) = self.message {
            write!(f, " msg {m}")?;
        }
        Ok(())
    }
}

/// Diagnostic produced when a flit has not moved for the watchdog period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeadlockReport {
    pub cycle: u64,
    /// Cycles since the stalled flit last made progress.
    pub stalled_for: u64,
    pub stalled: VcLocation,
    /// Each element is the virtual channel the previous one waits on.
    pub wait_for: Vec<VcLocation>,
    /// Whether the wait-for chain closes on itself.
    pub cyclic: bool,
}

impl fmt::Display for DeadlockReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "cycle {}: flit at {} stalled for {} cycles",
            self.cycle, self.stalled, self.stalled_for
        )?;
        for (i, v) in self.wait_for.iter().enumerate() {
            writeln!(f, "  {i}: waits on {v}")?;
        }
        write!(f, "  wait-for chain {}", if self.cyclic { "is cyclic" } else { "is open" })
    }
}
