"""FastAPI service wrapping the occupancy / risk pipeline.

Endpoints are stateless: each request carries the full scenario and seed,
and responses embed the exact file contents a client should persist, so a
thin client writes byte-identical artifacts wherever it runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, replace

from fastapi import FastAPI, HTTPException

from .. import __version__, outputs, runner
from ..errors import ContractViolation
from ..filtering import FilterConfig
from ..risk import LossConfig
from ..runner import RunOutput
from ..scenario import Scenario
from .models import (
    CompareRequest,
    CompareResponse,
    CompareSummary,
    FilterOverrides,
    LossOverrides,
    RunRequest,
    RunResponse,
    RunSummary,
)

app = FastAPI(
    title="gridrisk",
    version=__version__,
    description="Dynamic occupancy mapping and cooperative collision-risk evaluation",
)


def _filter_config(overrides: FilterOverrides | None, seed: int) -> FilterConfig:
    cfg = FilterConfig(seed=seed)
    if overrides is not None:
        cfg = replace(cfg, **overrides.model_dump(exclude_none=True))
    return cfg


def _loss_config(overrides: LossOverrides | None) -> LossConfig:
    if overrides is None:
        return LossConfig()
    try:
        return LossConfig(**overrides.model_dump(exclude_none=True))
    except ContractViolation as exc:
        raise HTTPException(status_code=422, detail=f"loss: {exc}") from exc


def _check_epochs(scenario: Scenario, tau: float | None, snapshot_epochs: list[int]) -> int:
    n_epochs = runner.epoch_count(scenario, tau if tau is not None else scenario.grid.tau)
    if n_epochs < 1:
        raise HTTPException(status_code=422, detail="tau: scenario is shorter than one epoch")
    for e in snapshot_epochs:
        if not 0 <= e < n_epochs:
            raise HTTPException(
                status_code=422,
                detail=f"snapshot_epochs: epoch {e} outside run of {n_epochs} epochs",
            )
    return n_epochs


def _summary(out: RunOutput) -> RunSummary:
    return RunSummary(
        mode=out.mode,
        seed=out.seed,
        epochs=out.epochs,
        final_accumulated_mean=out.profile.final_accumulated_mean,
        final_accumulated_variance=out.profile.final_accumulated_variance,
        final_plus_two_sigma=out.profile.final_accumulated_mean
        + 2.0 * math.sqrt(out.profile.final_accumulated_variance),
    )


def _metadata(request, filter_cfg: FilterConfig, loss_cfg: LossConfig, epochs: int, modes) -> str:
    return outputs.run_metadata(
        {
            "version": __version__,
            "seed": request.seed,
            "modes": list(modes),
            "epochs": epochs,
            "ego_samples": request.ego_samples,
            "cell_size_override": request.cell_size,
            "tau_override": request.tau,
            "filter": asdict(filter_cfg),
            "loss": asdict(loss_cfg),
            "scenario": request.scenario.model_dump(mode="json"),
        }
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/scenario-schema")
def scenario_schema() -> dict:
    return Scenario.model_json_schema()


@app.post("/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    epochs = _check_epochs(request.scenario, request.tau, request.snapshot_epochs)
    filter_cfg = _filter_config(request.filter, request.seed)
    loss_cfg = _loss_config(request.loss)
    try:
        out = runner.run_scenario(
            request.scenario,
            mode=request.mode,
            seed=request.seed,
            filter_config=filter_cfg,
            loss=loss_cfg,
            ego_samples=request.ego_samples,
            snapshot_epochs=request.snapshot_epochs,
            cell_size=request.cell_size,
            tau=request.tau,
        )
    except ContractViolation as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc

    files = {"risk.csv": outputs.risk_csv(out.profile)}
    for epoch, fields in sorted(out.snapshots.items()):
        files[f"map_{epoch}.csv"] = outputs.map_csv(out.spec, fields)
    files["run.json"] = _metadata(request, filter_cfg, loss_cfg, epochs, [request.mode])
    return RunResponse(summary=_summary(out), files=files)


@app.post("/compare", response_model=CompareResponse)
def compare(request: CompareRequest) -> CompareResponse:
    epochs = _check_epochs(request.scenario, request.tau, [])
    filter_cfg = _filter_config(request.filter, request.seed)
    loss_cfg = _loss_config(request.loss)
    try:
        results = runner.compare_scenario(
            request.scenario,
            seed=request.seed,
            filter_config=filter_cfg,
            loss=loss_cfg,
            ego_samples=request.ego_samples,
            cell_size=request.cell_size,
            tau=request.tau,
        )
    except ContractViolation as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc

    ego_summary = _summary(results["ego"])
    coop_summary = _summary(results["coop"])
    files = {
        "compare.csv": outputs.compare_csv(results["ego"].profile, results["coop"].profile),
        "run.json": _metadata(request, filter_cfg, loss_cfg, epochs, ["ego", "coop"]),
    }
    return CompareResponse(
        summary=CompareSummary(
            ego=ego_summary,
            coop=coop_summary,
            final_mean_delta=ego_summary.final_accumulated_mean - coop_summary.final_accumulated_mean,
            final_variance_delta=ego_summary.final_accumulated_variance
            - coop_summary.final_accumulated_variance,
        ),
        files=files,
    )
