"""Experiment configuration: a flat INI-style file with one section per
concern, plus defaults pulled from the benchmark case registry."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

from . import losses
from .problems import ProblemCase, get_case


@dataclass
class ExperimentConfig:
    case_id: str
    s: float = 5.0                      # laplace1d localization parameter
    mesh_elems: tuple | None = None
    hidden: tuple | None = None
    seeds: tuple[int, ...] = (0,)
    variant: str | None = None
    alpha_p: float = 100.0
    beta_d: float = 1.0
    beta_c: float = 1.0
    quad_counts: tuple | None = None
    epochs: int | None = None
    learning_rate: float = 1e-3
    log_every: int = 100
    smoothing: bool | None = None
    output_dir: str = "runs/out"
    sample_counts: tuple | None = None
    parallel_seeds: bool = False

    @classmethod
    def for_case(cls, case: ProblemCase) -> "ExperimentConfig":
        return cls(case_id=case.id, s=case.params.get("s", 5.0)).resolved(case)

    def resolved(self, case: ProblemCase) -> "ExperimentConfig":
        """Fill every None field from the case defaults."""
        return replace(
            self,
            mesh_elems=tuple(self.mesh_elems) if self.mesh_elems else case.mesh_elems,
            hidden=tuple(self.hidden) if self.hidden else case.net_hidden,
            quad_counts=tuple(self.quad_counts) if self.quad_counts else case.quad_counts,
            epochs=case.epochs if self.epochs is None else self.epochs,
            variant=self.variant or case.default_variant,
            smoothing=case.default_smoothing if self.smoothing is None else self.smoothing,
            sample_counts=tuple(self.sample_counts) if self.sample_counts
            else ((601,) if case.dimension == 1 else (101, 101)),
        )

    def validate(self, case: ProblemCase) -> None:
        variant = self.variant or case.default_variant
        if variant not in losses.VARIANTS:
            raise ValueError(f"unknown loss variant {variant!r}")
        is_approx = variant in (losses.APPROX_L2, losses.APPROX_L2_RF)
        if case.kind == "approximation" and not is_approx:
            raise ValueError(f"case {case.id} is an approximation problem; "
                             f"PDE loss {variant!r} does not apply")
        if case.kind == "pde" and is_approx:
            raise ValueError(f"case {case.id} is a PDE problem; approximation "
                             f"loss {variant!r} does not apply")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if not self.seeds:
            raise ValueError("need at least one seed")

    # --- INI round trip -----------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["case"] = {"id": self.case_id}
        if self.case_id == "laplace1d":
            cp["case"]["s"] = _fmt(self.s)
        if self.mesh_elems:
            cp["mesh"] = {"elems": " ".join(str(v) for v in self.mesh_elems)}
        cp["net"] = {"seeds": " ".join(str(v) for v in self.seeds)}
        if self.hidden:
            cp["net"]["hidden"] = " ".join(str(v) for v in self.hidden)
        cp["loss"] = {"alpha_p": _fmt(self.alpha_p), "beta_d": _fmt(self.beta_d),
                      "beta_c": _fmt(self.beta_c)}
        if self.variant:
            cp["loss"]["variant"] = self.variant
        if self.quad_counts:
            cp["quadrature"] = {"points": " ".join(str(v) for v in self.quad_counts)}
        cp["train"] = {"learning_rate": _fmt(self.learning_rate),
                       "log_every": str(self.log_every)}
        if self.epochs is not None:
            cp["train"]["epochs"] = str(self.epochs)
        cp["output"] = {"dir": self.output_dir,
                        "parallel_seeds": "on" if self.parallel_seeds else "off"}
        if self.smoothing is not None:
            cp["output"]["smoothing"] = "on" if self.smoothing else "off"
        if self.sample_counts:
            cp["output"]["sample_points"] = " ".join(str(v) for v in self.sample_counts)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as err:
            raise ValueError(f"bad config file: {err}") from err
        if "case" not in cp or "id" not in cp["case"]:
            raise ValueError("config needs a [case] section with an id")
        kw: dict = {"case_id": cp["case"]["id"]}
        if cp.has_option("case", "s"):
            kw["s"] = cp.getfloat("case", "s")
        if cp.has_option("mesh", "elems"):
            kw["mesh_elems"] = _ints(cp["mesh"]["elems"])
        if cp.has_option("net", "hidden"):
            kw["hidden"] = _ints(cp["net"]["hidden"])
        if cp.has_option("net", "seeds"):
            kw["seeds"] = _ints(cp["net"]["seeds"])
        for opt in ("variant",):
            if cp.has_option("loss", opt):
                kw[opt] = cp["loss"][opt]
        for opt in ("alpha_p", "beta_d", "beta_c"):
            if cp.has_option("loss", opt):
                kw[opt] = cp.getfloat("loss", opt)
        if cp.has_option("quadrature", "points"):
            kw["quad_counts"] = _ints(cp["quadrature"]["points"])
        if cp.has_option("train", "epochs"):
            kw["epochs"] = cp.getint("train", "epochs")
        if cp.has_option("train", "learning_rate"):
            kw["learning_rate"] = cp.getfloat("train", "learning_rate")
        if cp.has_option("train", "log_every"):
            kw["log_every"] = cp.getint("train", "log_every")
        if cp.has_option("output", "dir"):
            kw["output_dir"] = cp["output"]["dir"]
        if cp.has_option("output", "smoothing"):
            kw["smoothing"] = cp.getboolean("output", "smoothing")
        if cp.has_option("output", "sample_points"):
            kw["sample_counts"] = _ints(cp["output"]["sample_points"])
        if cp.has_option("output", "parallel_seeds"):
            kw["parallel_seeds"] = cp.getboolean("output", "parallel_seeds")
        return cls(**kw)

    def case(self) -> ProblemCase:
        return get_case(self.case_id, s=self.s)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _fmt(x: float) -> str:
    return repr(float(x))
