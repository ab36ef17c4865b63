"""Two-stage hyperparameter grid search over a resumable trainer.

Stage 1 trains every grid point for a few epochs and evaluates; only the
top-K survive. Stage 2 resumes the survivors to the full epoch budget, picks
the best, and keeps training it one epoch at a time until the validation
score drops (or a cap is hit). All selection points are barriers over
durable state, so a killed search resumes to the identical trial log.

The trainer is an interface: anything with resumable ``train`` and
``evaluate`` works, including an external process per call (see
:class:`CommandTrainer`), which is how real LM fine-tuning plugs in.
"""
from __future__ import annotations

import itertools
import json
import os
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

MANIFEST_VERSION = 1
MANIFEST_NAME = "search.json"

STATUSES = ("pending", "screened", "pruned", "finalist", "best", "extended")

_TRANSITIONS = {
    "pending": {"screened"},
    "screened": {"pruned", "finalist"},
    "finalist": {"best"},
    "best": {"extended"},
    "extended": set(),
    "pruned": set(),
}


class InvalidSchedule(ValueError):
    """epoch_partial must satisfy 1 <= M < L."""


class TrainerError(RuntimeError):
    """A trainer call failed; carries the trial it belonged to."""


class CorruptManifest(Exception):
    """The persisted search state is unreadable or internally inconsistent."""


class VersionMismatch(CorruptManifest):
    """The persisted search state was written by an incompatible version."""


class Trainer(Protocol):
    """Resumable training interface; scores are higher-is-better.

    Training M epochs and then L-M more from the returned checkpoint must be
    equivalent to training L epochs in one call. Trainers for loss-like
    scores must negate them.
    """

    def train(self, config: dict[str, Any], from_checkpoint: str | None, epochs: int) -> str: ...

    def evaluate(self, checkpoint_ref: str) -> float: ...


@dataclass(frozen=True)
class SearchSpace:
    """Named parameter axes; the grid is their cartesian product, enumerated
    in row-major order of axis declaration."""

    axes: tuple[tuple[str, tuple[Any, ...]], ...]

    def __post_init__(self):
        if not self.axes:
            raise ValueError("search space needs at least one axis")
        for name, values in self.axes:
            if not values:
                raise ValueError(f"axis {name!r} has no candidate values")

    @classmethod
    def from_dict(cls, axes: dict[str, list[Any]]) -> SearchSpace:
        return cls(tuple((name, tuple(values)) for name, values in axes.items()))

    def grid(self) -> list[dict[str, Any]]:
        names = [name for name, _ in self.axes]
        return [
            dict(zip(names, combo))
            for combo in itertools.product(*(values for _, values in self.axes))
        ]

    def to_json(self) -> list[list[Any]]:
        return [[name, list(values)] for name, values in self.axes]


@dataclass
class TrialState:
    """Per-config progress through the search."""

    index: int
    config: dict[str, Any]
    status: str = "pending"
    epochs_done: int = 0
    best_val_score: float | None = None
    checkpoint_ref: str | None = None
    # One entry per evaluation: (epochs_done, score, checkpoint_ref).
    evals: list[tuple[int, float, str]] = field(default_factory=list)

    def advance(self, new_status: str) -> None:
        if new_status not in _TRANSITIONS.get(self.status, set()):
            raise CorruptManifest(
                f"trial {self.index}: illegal status transition {self.status} -> {new_status}"
            )
        self.status = new_status

    def record_eval(self, epochs: int, score: float, checkpoint: str) -> None:
        self.epochs_done = epochs
        self.checkpoint_ref = checkpoint
        self.evals.append((epochs, score, checkpoint))
        if self.best_val_score is None or score > self.best_val_score:
            self.best_val_score = score

    def score_at(self, epochs: int) -> float:
        for e, score, _ in self.evals:
            if e == epochs:
                return score
        raise CorruptManifest(f"trial {self.index}: no evaluation recorded at epoch {epochs}")

    def best_eval(self) -> tuple[int, float, str]:
        """The (epochs, score, checkpoint) with the maximum score; earliest wins ties."""
        return max(self.evals, key=lambda e: (e[1], -e[0]))

    def to_json(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "config": self.config,
            "status": self.status,
            "epochs_done": self.epochs_done,
            "best_val_score": self.best_val_score,
            "checkpoint_ref": self.checkpoint_ref,
            "evals": [{"epochs": e, "score": s, "checkpoint": c} for e, s, c in self.evals],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> TrialState:
        try:
            trial = cls(
                index=obj["index"],
                config=obj["config"],
                status=obj["status"],
                epochs_done=obj["epochs_done"],
                best_val_score=obj["best_val_score"],
                checkpoint_ref=obj["checkpoint_ref"],
                evals=[(e["epochs"], e["score"], e["checkpoint"]) for e in obj["evals"]],
            )
        except (KeyError, TypeError) as exc:
            raise CorruptManifest(f"malformed trial entry: {exc}") from exc
        if trial.status not in STATUSES:
            raise CorruptManifest(f"trial {trial.index}: unknown status {trial.status!r}")
        return trial


@dataclass
class SearchResult:
    best_trial: TrialState
    best_checkpoint: str
    best_score: float
    best_epochs: int
    trials: list[TrialState]


class SearchRun:
    """Owns the trial states and (optionally) their durable manifest."""

    def __init__(
        self,
        space: SearchSpace,
        epochs: int,
        epoch_partial: int,
        n_max_config: int,
        extension_cap: int = 10,
        search_dir: str | Path | None = None,
    ):
        if not 1 <= epoch_partial < epochs:
            raise InvalidSchedule(
                f"need 1 <= epoch_partial < epochs, got M={epoch_partial}, L={epochs}"
            )
        if n_max_config < 1:
            raise ValueError(f"n_max_config must be >= 1, got {n_max_config}")
        if extension_cap < 0:
            raise ValueError(f"extension_cap must be >= 0, got {extension_cap}")
        self.space = space
        self.epochs = epochs
        self.epoch_partial = epoch_partial
        self.n_max_config = n_max_config
        self.extension_cap = extension_cap
        self.search_dir = Path(search_dir) if search_dir is not None else None
        self.trials = [TrialState(index=i, config=c) for i, c in enumerate(space.grid())]
        self.completed = False
        self.result_entry: dict[str, Any] | None = None
        self._lock = threading.Lock()

    # -- persistence ---------------------------------------------------

    def save(self) -> None:
        if self.search_dir is None:
            return
        with self._lock:
            self.search_dir.mkdir(parents=True, exist_ok=True)
            manifest = {
                "version": MANIFEST_VERSION,
                "space": self.space.to_json(),
                "epochs": self.epochs,
                "epoch_partial": self.epoch_partial,
                "n_max_config": self.n_max_config,
                "extension_cap": self.extension_cap,
                "completed": self.completed,
                "trials": [t.to_json() for t in self.trials],
                "result": self.result_entry,
            }
            tmp = self.search_dir / (MANIFEST_NAME + ".tmp")
            tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
            os.replace(tmp, self.search_dir / MANIFEST_NAME)

    @classmethod
    def load(cls, search_dir: str | Path) -> SearchRun:
        path = Path(search_dir) / MANIFEST_NAME
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptManifest(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(manifest, dict) or "version" not in manifest:
            raise CorruptManifest(f"{path}: not a search manifest")
        if manifest["version"] != MANIFEST_VERSION:
            raise VersionMismatch(
                f"{path}: manifest version {manifest['version']}, expected {MANIFEST_VERSION}"
            )
        try:
            space = SearchSpace(
                tuple((name, tuple(values)) for name, values in manifest["space"])
            )
            run = cls(
                space=space,
                epochs=manifest["epochs"],
                epoch_partial=manifest["epoch_partial"],
                n_max_config=manifest["n_max_config"],
                extension_cap=manifest["extension_cap"],
                search_dir=search_dir,
            )
            trials = [TrialState.from_json(t) for t in manifest["trials"]]
            run.completed = manifest["completed"]
            run.result_entry = manifest["result"]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CorruptManifest):
                raise
            raise CorruptManifest(f"{path}: malformed manifest ({exc})") from exc
        if len(trials) != len(run.trials):
            raise CorruptManifest(
                f"{path}: {len(trials)} trials recorded for a grid of {len(run.trials)}"
            )
        run.trials = sorted(trials, key=lambda t: t.index)
        run._validate_loaded()
        return run

    def _validate_loaded(self) -> None:
        M, L = self.epoch_partial, self.epochs
        for i, trial in enumerate(self.trials):
            if trial.index != i:
                raise CorruptManifest(f"trial indices not contiguous at {trial.index}")
            s = trial.status
            consistent = {
                "pending": trial.epochs_done == 0,
                "screened": trial.epochs_done == M,
                "pruned": trial.epochs_done == M,
                "finalist": trial.epochs_done in (M, L),
                "best": trial.epochs_done == L,
                "extended": L < trial.epochs_done <= L + self.extension_cap,
            }.get(s, False)
            if not consistent:
                raise CorruptManifest(
                    f"trial {trial.index}: status {s!r} inconsistent with "
                    f"epochs_done={trial.epochs_done} (M={M}, L={L})"
                )

    # -- schedule ------------------------------------------------------

    def _train_and_eval(
        self, trainer: Trainer, trial: TrialState, from_checkpoint: str | None, epochs: int, total: int
    ) -> None:
        try:
            checkpoint = trainer.train(trial.config, from_checkpoint, epochs)
            score = trainer.evaluate(checkpoint)
        except Exception as exc:
            raise TrainerError(f"trial {trial.index} config={trial.config}: {exc}") from exc
        trial.record_eval(total, score, checkpoint)

    def run(self, trainer: Trainer, workers: int = 1) -> SearchResult:
        if self.completed:
            return self._result()
        M, L, K = self.epoch_partial, self.epochs, self.n_max_config

        # Stage 1: screen every grid point at M epochs.
        pending = [t for t in self.trials if t.status == "pending"]

        def screen(trial: TrialState) -> None:
            self._train_and_eval(trainer, trial, None, M, M)
            trial.advance("screened")
            self.save()

        if pending:
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    list(pool.map(screen, pending))
            else:
                for trial in pending:
                    screen(trial)

        # Selection barrier: top-K by screening score, ties to the lower index.
        if all(t.status == "screened" for t in self.trials):
            ranked = sorted(self.trials, key=lambda t: (-t.score_at(M), t.index))
            for rank, trial in enumerate(ranked):
                trial.advance("finalist" if rank < K else "pruned")
            self.save()

        # Stage 2: resume finalists to the full epoch budget.
        for trial in self.trials:
            if trial.status == "finalist" and trial.epochs_done < L:
                self._train_and_eval(trainer, trial, trial.checkpoint_ref, L - trial.epochs_done, L)
                self.save()

        # Best-model barrier.
        finalists = [t for t in self.trials if t.status in ("finalist", "best", "extended")]
        best = next((t for t in finalists if t.status in ("best", "extended")), None)
        if best is None:
            best = min(finalists, key=lambda t: (-t.score_at(L), t.index))
            best.advance("best")
            self.save()

        # Extension: one epoch at a time until the score drops strictly below
        # the best seen for this config, or the cap is reached. The stop
        # decision reads only recorded evals, so a killed run resumes to the
        # same point.
        while True:
            extension_done = best.epochs_done - L
            if extension_done > 0:
                scores = [score for _, score, _ in best.evals]
                if scores[-1] < max(scores[:-1]):
                    break
            if extension_done >= self.extension_cap:
                break
            if best.status == "best":
                best.advance("extended")
            self._train_and_eval(trainer, best, best.checkpoint_ref, 1, best.epochs_done + 1)
            self.save()

        epochs_at_best, best_score, best_checkpoint = best.best_eval()
        self.completed = True
        self.result_entry = {
            "best_index": best.index,
            "checkpoint": best_checkpoint,
            "score": best_score,
            "epochs": epochs_at_best,
        }
        self.save()
        return self._result()

    def _result(self) -> SearchResult:
        if self.result_entry is None:
            raise CorruptManifest("search marked completed without a stored result")
        entry = self.result_entry
        return SearchResult(
            best_trial=self.trials[entry["best_index"]],
            best_checkpoint=entry["checkpoint"],
            best_score=entry["score"],
            best_epochs=entry["epochs"],
            trials=list(self.trials),
        )


def run_search(
    space: SearchSpace,
    trainer: Trainer,
    epochs: int,
    epoch_partial: int,
    n_max_config: int,
    extension_cap: int = 10,
    search_dir: str | Path | None = None,
    workers: int = 1,
) -> SearchResult:
    """Run (or resume) the full two-stage search and return the best trial
    plus the complete trial log.

    When ``search_dir`` is given, state is durably persisted after every
    trial-state transition and an existing manifest there is resumed;
    re-running a completed search is a no-op returning the stored result.
    """
    if search_dir is not None and (Path(search_dir) / MANIFEST_NAME).exists():
        run = SearchRun.load(search_dir)
    else:
        run = SearchRun(space, epochs, epoch_partial, n_max_config, extension_cap, search_dir)
        run.save()
    return run.run(trainer, workers=workers)


def resume(search_dir: str | Path, trainer: Trainer, workers: int = 1) -> SearchResult:
    """Resume a persisted search; completed searches return the stored result."""
    return SearchRun.load(search_dir).run(trainer, workers=workers)


class CommandTrainer:
    """Trainer adapter that shells out to an external command per call.

    Train calls run ``<command> train --epochs N --workdir DIR
    [--from-checkpoint REF] --set key=value ...`` and take the last stdout
    line as the checkpoint ref. Evaluate calls run ``<command> evaluate
    --checkpoint REF`` and parse the last stdout line as a float score
    (higher is better).
    """

    def __init__(self, command: str, workdir: str | Path):
        self.argv = shlex.split(command)
        self.workdir = Path(workdir)

    def _run(self, args: list[str]) -> str:
        proc = subprocess.run(
            self.argv + args, capture_output=True, text=True, cwd=None
        )
        if proc.returncode != 0:
            raise RuntimeError(
                f"command {' '.join(self.argv + args)!r} exited {proc.returncode}: "
                f"{proc.stderr.strip()[:500]}"
            )
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if not lines:
            raise RuntimeError(f"command {' '.join(self.argv + args)!r} produced no output")
        return lines[-1].strip()

    def train(self, config: dict[str, Any], from_checkpoint: str | None, epochs: int) -> str:
        self.workdir.mkdir(parents=True, exist_ok=True)
        args = ["train", "--epochs", str(epochs), "--workdir", str(self.workdir)]
        if from_checkpoint:
            args += ["--from-checkpoint", from_checkpoint]
        for key, value in config.items():
            args += ["--set", f"{key}={value}"]
        return self._run(args)

    def evaluate(self, checkpoint_ref: str) -> float:
        out = self._run(["evaluate", "--checkpoint", checkpoint_ref])
        try:
            return float(out)
        except ValueError as exc:
            raise RuntimeError(f"evaluate output {out!r} is not a number") from exc
