"""Per-iteration run records shared by all solvers and baselines.

The CSV schema is frozen:  t,oracle_calls,f,grad_norm,M,step_norm,backtracks,wall_ms
with oracle_calls counting gradient evaluations since the run started.  Given
fixed seeds every column except wall_ms is bit-stable across repeated runs.
"""
import csv
import io
from dataclasses import dataclass, field


CSV_HEADER = ("t", "oracle_calls", "f", "grad_norm", "M", "step_norm",
              "backtracks", "wall_ms")


@dataclass
class TraceRow:
    t: int
    oracle_calls: int
    f: float
    grad_norm: float
    m: float
    step_norm: float
    backtracks: int
    wall_ms: float

    def as_csv_fields(self):
        return (str(self.t), str(self.oracle_calls), repr(float(self.f)),
                repr(float(self.grad_norm)), repr(float(self.m)),
                repr(float(self.step_norm)), str(self.backtracks),
                f"{self.wall_ms:.3f}")


@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)  # diagnostics, not serialized

    def append(self, row: TraceRow):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def final_f(self):
        return self.rows[-1].f if self.rows else None

    @property
    def final_grad_norm(self):
        return self.rows[-1].grad_norm if self.rows else None

    def oracle_calls_to_tol(self, tol: float):
        """Gradient calls consumed when grad_norm first fell to tol, else None."""
        for row in self.rows:
            if row.grad_norm <= tol:
                return row.oracle_calls
        return None

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.as_csv_fields())
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_string())
