//! Tunable restorer constants, loaded from `data/restore_constants.txt`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::kv::KvDocument;

pub const CONSTANTS_FORMAT: &str = "objrestore-restore-constants";
pub const CONSTANTS_VERSION: u32 = 1;

const BUILTIN_TEXT: &str = include_str!("../../data/restore_constants.txt");

#[derive(Clone, Debug, PartialEq)]
pub struct RestoreConstants {
    /// TV weight per unit of noise sigma (float scale).
    pub c_tv: f64,
    pub tv_iterations: usize,
    /// Chambolle dual step; must stay below 1/4.
    pub tv_step: f64,
    /// Deblocking threshold per unit of mean luma quantiser step.
    pub c_q: f64,
    /// Lower bound on the Wiener regulariser.
    pub eps_floor: f64,
}

impl RestoreConstants {
    pub fn builtin() -> &'static RestoreConstants {
        static CELL: OnceLock<RestoreConstants> = OnceLock::new();
        CELL.get_or_init(|| {
            RestoreConstants::parse(BUILTIN_TEXT).expect("shipped constants are valid")
        })
    }

    pub fn parse(text: &str) -> Result<RestoreConstants> {
        let doc = KvDocument::parse_versioned(text, CONSTANTS_FORMAT, CONSTANTS_VERSION)?;
        let c = RestoreConstants {
            c_tv: doc.require("tv.c")?,
            tv_iterations: doc.require("tv.iterations")?,
            tv_step: doc.require("tv.step")?,
            c_q: doc.require("deblock.c")?,
            eps_floor: doc.require("wiener.eps_floor")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.c_tv) && positive(self.c_q) && positive(self.eps_floor)) {
            return Err(Error::invalid("restore constants must be positive"));
        }
        if !(positive(self.tv_step) && self.tv_step < 0.25) {
            return Err(Error::invalid("TV step must lie in (0, 0.25)"));
        }
        if self.tv_iterations == 0 {
            return Err(Error::invalid("TV needs at least one iteration"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut doc = KvDocument::new(CONSTANTS_FORMAT, CONSTANTS_VERSION);
        doc.set("tv.c", self.c_tv);
        doc.set("tv.iterations", self.tv_iterations);
        doc.set("tv.step", self.tv_step);
        doc.set("deblock.c", self.c_q);
        doc.set("wiener.eps_floor", self.eps_floor);
        doc.to_text("Restoration constants.")
    }
}
