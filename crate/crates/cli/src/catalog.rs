//! The fixed list of checks `verify` knows about, with the text `explain` prints.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    Resolution,
    Anticommute,
    H0Crosscheck,
    CanonicalBasis,
    Exactness,
    DeltaAgreement,
    UniversalRecursion,
    BasisTheorem,
    EulerMock,
}

pub const ALL: [CheckId; 9] = [
    CheckId::Resolution,
    CheckId::Anticommute,
    CheckId::H0Crosscheck,
    CheckId::CanonicalBasis,
    CheckId::Exactness,
    CheckId::DeltaAgreement,
    CheckId::UniversalRecursion,
    CheckId::BasisTheorem,
    CheckId::EulerMock,
];

pub struct Entry {
    pub anchor: &'static str,
    pub statement: &'static str,
    pub witness: &'static str,
}

impl CheckId {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Resolution => "resolution",
            CheckId::Anticommute => "anticommute",
            CheckId::H0Crosscheck => "h0-crosscheck",
            CheckId::CanonicalBasis => "canonical-basis",
            CheckId::Exactness => "exactness",
            CheckId::DeltaAgreement => "delta-agreement",
            CheckId::UniversalRecursion => "universal-recursion",
            CheckId::BasisTheorem => "basis-theorem",
            CheckId::EulerMock => "euler-mock",
        }
    }

    pub fn entry(self) -> Entry {
        match self {
            CheckId::Resolution => Entry {
                anchor: "Anderson resolution of the universal norm distribution",
                statement: "At every stalk level z' of z the complex L_z' satisfies d^2 = 0, has no cohomology in \
                            negative degrees, and its H^0 is the relation module U_z' (compared as lattices).",
                witness: "level name plus the first failing degree, or the offending composite entry",
            },
            CheckId::Anticommute => Entry {
                anchor: "Double complex K_z on the degree window",
                statement: "On the windowed K_z every d_x and delta_x squares to zero and every distinct pair \
                            anticommutes, as exact integer matrices.",
                witness: "operator pair, source degree and one nonzero entry of the sum",
            },
            CheckId::H0Crosscheck => Entry {
                anchor: "Size of H^0(G_z, U_z/MU_z)",
                statement: "At every stalk level the Z/M-rank of the fixed points is 2^(#primes) * rank(T/MT), \
                            computed from the kernel of the stacked (sigma - 1), from the windowed total complex, \
                            and from the bar-side lifts.",
                witness: "level name with the three ranks",
            },
            CheckId::CanonicalBasis => Entry {
                anchor: "Canonical basis from the lifts of [1, y, y]",
                statement: "The classes h * c_y (y | z squarefree, h in H) are fixed, independent, and span \
                            H^0(G_z', U_z'/MU_z') at every stalk level z'.",
                witness: "level name and the failing certificate",
            },
            CheckId::Exactness => Entry {
                anchor: "Exact sequence through gamma_z(x)",
                statement: "For every prime x: gamma is injective, its image is the kernel of U_z -> U_z/I_x, and \
                            U_z/z(x) -> U_z/I_x is onto.",
                witness: "prime id and the first violated clause",
            },
            CheckId::DeltaAgreement => Entry {
                anchor: "Diagonal shift against the characterized Delta_x",
                statement: "On every basis class h * c_y the diagonal shift Delta_x and the operator characterized \
                            by the decomposition of (sigma - 1)a agree in U/MU, and the latter does not depend on \
                            the decomposition chosen.",
                witness: "prime id, class and both values",
            },
            CheckId::UniversalRecursion => Entry {
                anchor: "Universal Kolyvagin recursion",
                statement: "For the canonical family and the Kolyvagin family D_y[z(y)] (and a supplied family, if \
                            any): Delta_x c_y = c_{y/x} when x | y, and Delta_x c_y = 0 otherwise.",
                witness: "family, y and x with the computed and expected classes",
            },
            CheckId::BasisTheorem => Entry {
                anchor: "Basis theorems for the canonical and Kolyvagin classes",
                statement: "The change of basis from {c_y} to each family is unitriangular over T/MT with respect \
                            to divisibility and is invertible.",
                witness: "family and the offending matrix entry",
            },
            CheckId::EulerMock => Entry {
                anchor: "Kolyvagin recursion on a finite mock Euler system",
                statement: "After the mock passes its validation suite, every family from universal-recursion \
                            satisfies Q_x(Fr^-1) kappa(c_{y/x})(Fr_x) = kappa(c_y)(sigma_x) in W.",
                witness: "failed validation checks, or family, y, x and both sides",
            },
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown check `{0}`; valid checks: {list}", list = valid_list())]
pub struct UnknownCheck(pub String);

pub fn valid_list() -> String {
    ALL.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ")
}

impl FromStr for CheckId {
    type Err = UnknownCheck;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL.iter().copied().find(|c| c.as_str() == s.trim()).ok_or_else(|| UnknownCheck(s.to_string()))
    }
}

pub fn explain(id: CheckId) -> String {
    let e = id.entry();
    format!("{id}\n  anchor:    {}\n  statement: {}\n  witness:   {}\n", e.anchor, e.statement, e.witness)
}
