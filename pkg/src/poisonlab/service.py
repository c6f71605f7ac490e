"""Session-oriented HTTP API over the workbench engine.

State lives in a per-session directory of JSON artifacts plus the dataset
CSV; no database. Long work (sweeps, attacks) runs on a bounded FIFO worker
pool and is tracked by persisted job records, so completed results survive
process restarts. Every JSON body is serialized canonically, which makes
responses byte-identical to the module outputs they wrap and gives ETags
for free.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from datetime import datetime, timezone
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from . import jsonio
from .data import Dataset, load_csv, standardize, stratified_subsample, export_csv
from .classifier import ModelConfig, model_from_dict, model_to_dict, train
from .attacks import ALGORITHMS, AttackConfig, attack_result_to_dict, run_attack
from .vulnerability import (
    DbdConfig,
    default_cap,
    sweep_records,
    vulnerability_sweep,
    write_sweep_csv,
)
from .impact import build_local_impact_graph
from .projection import ProjectionConfig, tsne_embed
from .reporting import feature_report, instance_attributes, model_overview

ATTACK_VIEWS = ("overview", "projection", "instances", "features", "graph")
DEFAULT_PAGE_SIZE = 50
MAX_PAGE_SIZE = 500


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _canonical_response(payload, status_code: int = 200, etag: str | None = None) -> Response:
    body = jsonio.canonical_bytes(payload)
    headers = {"ETag": f'"{jsonio.payload_etag(payload)}"' if etag is None else f'"{etag}"'}
    return Response(
        content=body, status_code=status_code, media_type="application/json", headers=headers
    )


def _file_response(path: Path) -> Response:
    body = path.read_bytes()
    return Response(
        content=body,
        media_type="application/json",
        headers={"ETag": f'"{hashlib.sha256(body).hexdigest()}"'},
    )


class JobManager:
    """Bounded FIFO worker pool with one persisted JSON record per job."""

    def __init__(self, jobs_dir: Path, workers: int):
        self.jobs_dir = jobs_dir
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self.lock = threading.Lock()
        self._fail_interrupted()

    def _fail_interrupted(self) -> None:
        # a restart cannot resume in-flight work; completed jobs stay Done
        for path in self.jobs_dir.glob("*.json"):
            payload = jsonio.read_json(path)
            if payload.get("state") in ("Pending", "Running"):
                payload["state"] = "Failed"
                payload["error"] = "interrupted by service restart"
                payload["updated_at"] = _now()
                jsonio.write_json(path, payload)

    def _path(self, job_id: str) -> Path:
        return self.jobs_dir / f"{job_id}.json"

    def create(self, kind: str, session_id: str, *, done: bool = False, **extra) -> str:
        job_id = uuid.uuid4().hex[:16]
        payload = {
            "job_id": job_id,
            "kind": kind,
            "session_id": session_id,
            "state": "Done" if done else "Pending",
            "progress": 1.0 if done else 0.0,
            "error": None,
            "created_at": _now(),
            "updated_at": _now(),
            **extra,
        }
        jsonio.write_json(self._path(job_id), payload)
        return job_id

    def update(self, job_id: str, **changes) -> None:
        with self.lock:
            payload = jsonio.read_json(self._path(job_id))
            payload.update(changes)
            payload["updated_at"] = _now()
            jsonio.write_json(self._path(job_id), payload)

    def status(self, job_id: str) -> dict | None:
        path = self._path(job_id)
        if not path.is_file():
            return None
        return jsonio.read_json(path)

    def submit(self, job_id: str, fn) -> None:
        def runner():
            self.update(job_id, state="Running")
            try:
                fn(lambda fraction: self.update(job_id, progress=float(fraction)))
            except Exception as exc:
                self.update(job_id, state="Failed", error=str(exc))
            else:
                self.update(job_id, state="Done", progress=1.0)

        self.pool.submit(runner)


def _parse_model_config(payload) -> ModelConfig:
    if payload in (None, {}, ""):
        return ModelConfig()
    if isinstance(payload, str):
        payload = json.loads(payload)
    return ModelConfig.from_dict({**ModelConfig().to_dict(), **payload})


def _bad_request(message: str) -> HTTPException:
    return HTTPException(status_code=422, detail=message)


async def _json_body(request: Request):
    try:
        return await request.json()
    except json.JSONDecodeError as exc:
        raise _bad_request(f"body must be valid JSON: {exc}")


def create_app(data_dir: str | Path, workers: int = 4) -> FastAPI:
    """Service instance rooted at ``data_dir``; restart-safe by construction."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="poisoning vulnerability workbench")
    jobs = JobManager(data_dir / "jobs", workers)
    app.state.jobs = jobs
    app.state.data_dir = data_dir
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()
    running: dict[tuple, tuple[str, str]] = {}  # key -> (job_id, config hash)

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    def session_dir(session_id: str) -> Path:
        sdir = data_dir / "sessions" / session_id
        if not (sdir / "session.json").is_file():
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return sdir

    def load_session(session_id: str) -> tuple[Path, dict]:
        sdir = session_dir(session_id)
        return sdir, jsonio.read_json(sdir / "session.json")

    def update_session(session_id: str, mutate) -> None:
        # read-modify-write under the session lock so concurrent jobs compose
        with session_lock(session_id):
            sdir = session_dir(session_id)
            payload = jsonio.read_json(sdir / "session.json")
            mutate(payload)
            payload["updated_at"] = _now()
            jsonio.write_json(sdir / "session.json", payload)

    def load_dataset(sdir: Path) -> Dataset:
        return Dataset.from_dict(jsonio.read_json(sdir / "dataset.json"))

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> Response:
        content_type = request.headers.get("content-type", "")
        csv_path: Path | None = None
        upload_bytes: bytes | None = None
        if content_type.startswith("multipart/"):
            form = await request.form()
            upload = form.get("file")
            if upload is None:
                raise _bad_request("multipart upload requires a 'file' part")
            upload_bytes = await upload.read()
            fields = {k: form.get(k) for k in form.keys() if k != "file"}
            subsample = None
            if fields.get("subsample_n"):
                subsample = {
                    "n": int(fields["subsample_n"]),
                    "seed": int(fields.get("subsample_seed") or 42),
                }
        else:
            body = await _json_body(request)
            fields = body
            path_value = body.get("dataset_path")
            if not path_value:
                raise _bad_request("JSON body requires 'dataset_path'")
            csv_path = Path(path_value)
            subsample = body.get("subsample")
            if subsample is not None and "n" not in subsample:
                raise _bad_request("subsample requires 'n'")

        for required in ("label_column", "positive_value", "negative_value"):
            if not fields.get(required):
                raise _bad_request(f"missing required field {required!r}")
        try:
            model_config = _parse_model_config(fields.get("model_config"))
        except (ValueError, KeyError, TypeError) as exc:
            raise _bad_request(f"invalid model_config: {exc}")

        session_id = uuid.uuid4().hex[:12]
        sdir = data_dir / "sessions" / session_id
        sdir.mkdir(parents=True)
        if upload_bytes is not None:
            csv_path = sdir / "upload.csv"
            csv_path.write_bytes(upload_bytes)
        try:
            dataset = load_csv(
                csv_path,
                label_column=str(fields["label_column"]),
                positive_value=str(fields["positive_value"]),
                negative_value=str(fields["negative_value"]),
            )
            if subsample:
                dataset = stratified_subsample(
                    dataset, int(subsample["n"]), int(subsample.get("seed", 42))
                )
            dataset = standardize(dataset)
            victim = train(dataset, model_config)
        except (OSError, ValueError) as exc:
            raise _bad_request(str(exc))

        jsonio.write_json(sdir / "dataset.json", dataset.to_dict())
        export_csv(dataset, sdir / "dataset.csv")
        jsonio.write_json(sdir / "model.json", model_to_dict(victim))
        session_payload = {
            "session_id": session_id,
            "created_at": _now(),
            "updated_at": _now(),
            "label_column": str(fields["label_column"]),
            "positive_value": str(fields["positive_value"]),
            "negative_value": str(fields["negative_value"]),
            "subsample": subsample,
            "model_config": model_config.to_dict(),
            "dataset_fingerprint": dataset.fingerprint(),
            "n": dataset.n,
            "d": dataset.d,
            "sweeps": {},
            "latest_sweep": None,
        }
        jsonio.write_json(sdir / "session.json", session_payload)
        return _canonical_response(
            {
                "session_id": session_id,
                "n": dataset.n,
                "d": dataset.d,
                "dataset_fingerprint": dataset.fingerprint(),
            },
            status_code=201,
        )

    @app.post("/sessions/{session_id}/sweep", status_code=202)
    async def start_sweep(session_id: str, request: Request) -> Response:
        sdir, session = load_session(session_id)
        body = {}
        if (await request.body()).strip():
            body = await _json_body(request)
        dataset = load_dataset(sdir)
        cap = int(body.get("cap") or default_cap(dataset.n))
        parallelism = int(body.get("parallelism") or 1)
        dbd_config = DbdConfig.from_dict(body.get("dbd_config") or {})
        raw_configs = body.get("attack_configs") or [
            {"algorithm": alg} for alg in ALGORITHMS
        ]
        try:
            attack_configs = [
                AttackConfig.from_dict({"budget": cap, **cfg}) for cfg in raw_configs
            ]
        except (ValueError, KeyError) as exc:
            raise _bad_request(f"invalid attack_configs: {exc}")
        model_config = ModelConfig.from_dict(session["model_config"])

        # parallelism changes resource use, never results, so it is not hashed
        sweep_hash = jsonio.config_hash(
            {
                "attack_configs": [c.to_dict() for c in attack_configs],
                "dbd_config": dbd_config.to_dict(),
                "cap": cap,
                "model_config": model_config.to_dict(),
                "dataset": session["dataset_fingerprint"],
            }
        )
        artifact = sdir / f"sweep_{sweep_hash}.json"
        if artifact.is_file():
            job_id = jobs.create("sweep", session_id, done=True, sweep=sweep_hash)
            return _canonical_response(
                {"job_id": job_id, "sweep": sweep_hash, "cached": True}, status_code=202
            )
        key = (session_id, "sweep", sweep_hash)
        with locks_guard:
            if key in running:
                job_id, _ = running[key]
                return _canonical_response(
                    {"job_id": job_id, "sweep": sweep_hash, "cached": False}, status_code=202
                )
            job_id = jobs.create("sweep", session_id, sweep=sweep_hash)
            running[key] = (job_id, sweep_hash)

        config_echo = {
            "attack_configs": [c.to_dict() for c in attack_configs],
            "dbd_config": dbd_config.to_dict(),
            "cap": cap,
            "model_config": model_config.to_dict(),
            "dataset_fingerprint": session["dataset_fingerprint"],
        }

        def work(report_progress):
            try:
                rows = vulnerability_sweep(
                    dataset,
                    model_config,
                    attack_configs,
                    dbd_config,
                    cap=cap,
                    parallelism=parallelism,
                    progress_callback=report_progress,
                )
                jsonio.write_json(
                    artifact, {"config": config_echo, "records": sweep_records(rows)}
                )
                write_sweep_csv(rows, sdir / f"sweep_{sweep_hash}.csv")

                def record(payload):
                    payload.setdefault("sweeps", {})[sweep_hash] = {
                        "job_id": job_id,
                        "created_at": _now(),
                    }
                    payload["latest_sweep"] = sweep_hash

                update_session(session_id, record)
            finally:
                with locks_guard:
                    running.pop(key, None)

        jobs.submit(job_id, work)
        return _canonical_response(
            {"job_id": job_id, "sweep": sweep_hash, "cached": False}, status_code=202
        )

    @app.get("/sessions/{session_id}/sweep")
    async def get_sweep(
        session_id: str,
        sort_key: str = "id",
        order: str = "asc",
        page: int = 1,
        page_size: int = DEFAULT_PAGE_SIZE,
        sweep: str | None = None,
    ) -> Response:
        sdir, session = load_session(session_id)
        sweep_hash = sweep or session.get("latest_sweep")
        if sweep_hash is None or not (sdir / f"sweep_{sweep_hash}.json").is_file():
            with locks_guard:
                busy = any(k[0] == session_id and k[1] == "sweep" for k in running)
            if busy:
                raise HTTPException(status_code=409, detail="sweep still running, retry later")
            raise HTTPException(status_code=404, detail="no completed sweep for this session")
        payload = jsonio.read_json(sdir / f"sweep_{sweep_hash}.json")
        records = payload["records"]
        if order not in ("asc", "desc"):
            raise _bad_request("order must be 'asc' or 'desc'")
        if records and sort_key not in records[0]:
            raise _bad_request(f"unknown sort_key {sort_key!r}")
        if not 1 <= page_size <= MAX_PAGE_SIZE:
            raise _bad_request(f"page_size must be in [1, {MAX_PAGE_SIZE}]")
        if page < 1:
            raise _bad_request("page must be >= 1")

        records = sorted(records, key=lambda r: r["id"])
        valued = [r for r in records if r[sort_key] is not None]
        nulls = [r for r in records if r[sort_key] is None]
        valued.sort(key=lambda r: r[sort_key], reverse=order == "desc")
        ordered = valued + nulls
        start = (page - 1) * page_size
        return _canonical_response(
            {
                "rows": ordered[start : start + page_size],
                "total_rows": len(ordered),
                "page": page,
                "page_size": page_size,
                "sort_key": sort_key,
                "order": order,
                "sweep": sweep_hash,
            }
        )

    @app.post("/sessions/{session_id}/attacks", status_code=202)
    async def start_attack(session_id: str, request: Request) -> Response:
        sdir, session = load_session(session_id)
        body = await _json_body(request)
        if "target_id" not in body:
            raise _bad_request("missing required field 'target_id'")
        algorithm = body.get("algorithm")
        if algorithm not in ALGORITHMS:
            raise _bad_request(f"algorithm must be one of {list(ALGORITHMS)}")
        dataset = load_dataset(sdir)
        target_id = int(body["target_id"])
        if target_id not in set(int(i) for i in dataset.ids):
            raise HTTPException(status_code=404, detail=f"unknown target id {target_id}")
        try:
            attack_config = AttackConfig.from_dict(
                {
                    "budget": default_cap(dataset.n),
                    **(body.get("attack_config") or {}),
                    "algorithm": algorithm,
                }
            )
            dbd_config = DbdConfig.from_dict(body.get("dbd_config") or {})
            projection_config = ProjectionConfig.from_dict(body.get("projection") or {})
            k = int(body.get("k") or 7)
            bins = int(body.get("bins") or 20)
        except (ValueError, KeyError) as exc:
            raise _bad_request(str(exc))
        model_config = ModelConfig.from_dict(session["model_config"])

        view_config = {
            "target_id": target_id,
            "algorithm": algorithm,
            "attack_config": attack_config.to_dict(),
            "dbd_config": dbd_config.to_dict(),
            "projection": projection_config.to_dict(),
            "k": k,
            "bins": bins,
            "model_config": model_config.to_dict(),
            "dataset_fingerprint": session["dataset_fingerprint"],
        }
        cfg_hash = jsonio.config_hash(view_config)
        adir = sdir / "attacks" / f"{target_id}_{algorithm}"
        config_file = adir / "config.json"
        if (
            config_file.is_file()
            and (adir / "result.json").is_file()
            and jsonio.read_json(config_file).get("hash") == cfg_hash
        ):
            job_id = jobs.create(
                "attack", session_id, done=True, target_id=target_id, algorithm=algorithm
            )
            return _canonical_response({"job_id": job_id, "cached": True}, status_code=202)

        key = (session_id, "attack", target_id, algorithm)
        with locks_guard:
            if key in running:
                job_id, running_hash = running[key]
                if running_hash == cfg_hash:
                    return _canonical_response(
                        {"job_id": job_id, "cached": False}, status_code=202
                    )
                raise HTTPException(
                    status_code=409,
                    detail="an attack with a different config is running for this target",
                )
            job_id = jobs.create(
                "attack", session_id, target_id=target_id, algorithm=algorithm
            )
            running[key] = (job_id, cfg_hash)

        def work(report_progress):
            try:
                result = run_attack(dataset, model_config, attack_config, target_id)
                report_progress(0.5)
                overview = model_overview(result, dataset).to_dict()
                instances = [
                    r.to_dict() for r in instance_attributes(result, dataset, dbd_config)
                ]
                features = [r.to_dict() for r in feature_report(result, dataset, bins)]
                graph = build_local_impact_graph(dataset, result, k, model_config).to_dict()
                projection = tsne_embed(result.poisoned_dataset, projection_config).to_records(
                    result.poisoned_dataset
                )
                adir.mkdir(parents=True, exist_ok=True)
                jsonio.write_json(adir / "overview.json", overview)
                jsonio.write_json(adir / "instances.json", instances)
                jsonio.write_json(adir / "features.json", features)
                jsonio.write_json(adir / "graph.json", graph)
                jsonio.write_json(adir / "projection.json", projection)
                jsonio.write_json(config_file, {"hash": cfg_hash, **view_config})
                # result.json lands last: its presence marks the attack complete
                jsonio.write_json(adir / "result.json", attack_result_to_dict(result, dataset))
            finally:
                with locks_guard:
                    running.pop(key, None)

        jobs.submit(job_id, work)
        return _canonical_response({"job_id": job_id, "cached": False}, status_code=202)

    @app.get("/sessions/{session_id}/attacks/{target_id}/{algorithm}/{view}")
    async def get_attack_view(
        session_id: str, target_id: int, algorithm: str, view: str
    ) -> Response:
        sdir, _ = load_session(session_id)
        if algorithm not in ALGORITHMS:
            raise _bad_request(f"algorithm must be one of {list(ALGORITHMS)}")
        if view not in ATTACK_VIEWS + ("result",):
            raise _bad_request(f"view must be one of {list(ATTACK_VIEWS) + ['result']}")
        adir = sdir / "attacks" / f"{target_id}_{algorithm}"
        if not (adir / "result.json").is_file():
            with locks_guard:
                busy = (session_id, "attack", target_id, algorithm) in running
            if busy:
                raise HTTPException(status_code=409, detail="attack still running, retry later")
            raise HTTPException(
                status_code=404,
                detail=f"no attack result for target {target_id} with {algorithm}",
            )
        return _file_response(adir / f"{view}.json")

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str) -> Response:
        payload = jobs.status(job_id)
        if payload is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return _canonical_response(payload)

    return app
