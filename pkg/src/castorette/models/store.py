"""Registry of models and their trained versions.

A model is pure declaration: what to predict, from what, on what
cadence.  Versions carry the trained parameter blobs.  Storing a
version twice for the same training anchor returns the existing row,
which is what makes scheduler retries and crash replays harmless.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..context.store import ContextKey, ContextStore
from ..errors import NotFound, UnknownModel, ValidationError
from ..gam.serialize import validate_blob
from ..persist import Journal
from .spec import (
    ContextRef,
    DeploymentConfig,
    PipelineSpec,
    TASK_SCORE,
    TASK_TRAIN,
    _Diagnostics,
    parse_deployment,
    parse_pipeline,
)


@dataclass(frozen=True)
class Model:
    id: int
    name: str
    description: str
    target: ContextKey
    target_ref: ContextRef
    pipeline: PipelineSpec
    train_schedule: DeploymentConfig
    # template stamped onto versions produced by training runs; a
    # version without its own schedule is scored once, immediately
    score_template: DeploymentConfig | None
    doc: dict = field(compare=False, repr=False, default_factory=dict)

    def producer(self, version_id: int) -> str:
        return f"model-{self.id}/v{version_id}"


@dataclass(frozen=True)
class ModelVersion:
    id: int
    model_id: int
    params: str = field(repr=False)
    trained_at: int
    created_at: int
    score_schedule: DeploymentConfig | None
    metrics: dict = field(default_factory=dict)


class ModelStore:
    def __init__(self, context: ContextStore, data_dir=None, clock=None,
                 params_validator=validate_blob, fsync: bool = True):
        self._context = context
        self._clock = clock
        self._validate_params = params_validator
        self._lock = threading.RLock()
        self._models: dict[int, Model] = {}
        self._by_name: dict[str, int] = {}
        self._versions: dict[int, ModelVersion] = {}
        self._by_model: dict[int, list[int]] = {}
        self._active: dict[int, int] = {}
        self._next_model = 1
        self._next_version = 1
        self._journal = Journal(data_dir, "models", fsync=fsync) if data_dir else None
        if self._journal is not None:
            state, events = self._journal.load()
            if state is not None:
                self._restore(state)
            for event in events:
                self._apply(event)

    # ------------------------------------------------------------------
    # writes

    def store_model(self, doc: dict) -> Model:
        """Validate and register a model document.

        All problems are collected before raising, so a bad document
        comes back with the full list of step diagnostics rather than
        just the first one.
        """
        with self._lock:
            model = self._parse_model(doc, self._next_model)
            if model.name in self._by_name:
                raise ValidationError(
                    f"model name {model.name!r} is already taken",
                    diagnostics=[{"step": "name", "message": "duplicate model name"}],
                )
            self._models[model.id] = model
            self._by_name[model.name] = model.id
            self._by_model[model.id] = []
            self._next_model += 1
            self._context.link_model(model.id, model.name, model.target)
            self._log({"op": "model", "id": model.id, "doc": doc})
            return model

    def store_version(self, model_id: int, params: str, trained_at: int,
                      score_schedule: DeploymentConfig | None = None,
                      metrics: dict | None = None) -> ModelVersion:
        with self._lock:
            model = self.get_model(model_id)
            for vid in self._by_model[model_id]:
                if self._versions[vid].trained_at == trained_at:
                    return self._versions[vid]
            self._validate_params(params)
            if score_schedule is None:
                score_schedule = model.score_template
            if score_schedule is not None and score_schedule.task != TASK_SCORE:
                raise ValidationError("version schedule must be a score schedule")
            version = ModelVersion(
                id=self._next_version,
                model_id=model_id,
                params=params,
                trained_at=int(trained_at),
                created_at=int(self._clock.now()) if self._clock else int(trained_at),
                score_schedule=score_schedule,
                metrics=dict(metrics or {}),
            )
            self._versions[version.id] = version
            self._by_model[model_id].append(version.id)
            self._next_version += 1
            self._log({
                "op": "version",
                "id": version.id,
                "model_id": model_id,
                "params": params,
                "trained_at": version.trained_at,
                "created_at": version.created_at,
                "score_schedule": (score_schedule.to_json()
                                   if score_schedule else None),
                "metrics": version.metrics,
            })
            return version

    def activate_version(self, model_id: int, version_id: int) -> None:
        with self._lock:
            self.get_model(model_id)
            version = self.get_version(version_id)
            if version.model_id != model_id:
                raise ValidationError(
                    f"version {version_id} belongs to model {version.model_id}, "
                    f"not {model_id}"
                )
            self._active[model_id] = version_id
            self._log({"op": "activate", "model_id": model_id,
                       "version_id": version_id})

    # ------------------------------------------------------------------
    # reads

    def get_model(self, model_id: int) -> Model:
        with self._lock:
            try:
                return self._models[model_id]
            except KeyError:
                raise UnknownModel(f"no model with id {model_id}") from None

    def resolve_model(self, name: str) -> Model:
        with self._lock:
            mid = self._by_name.get(name)
            if mid is None:
                raise UnknownModel(f"no model named {name!r}")
            return self._models[mid]

    def models(self) -> list[Model]:
        with self._lock:
            return [self._models[k] for k in sorted(self._models)]

    def get_version(self, version_id: int) -> ModelVersion:
        with self._lock:
            try:
                return self._versions[version_id]
            except KeyError:
                raise NotFound(f"no model version with id {version_id}") from None

    def versions(self, model_id: int) -> list[ModelVersion]:
        with self._lock:
            self.get_model(model_id)
            return [self._versions[v] for v in sorted(self._by_model[model_id])]

    def latest_version(self, model_id: int) -> ModelVersion | None:
        """The pinned active version if one was set, else the version
        with the newest training anchor."""
        with self._lock:
            self.get_model(model_id)
            pinned = self._active.get(model_id)
            if pinned is not None:
                return self._versions[pinned]
            vids = self._by_model[model_id]
            if not vids:
                return None
            best = max(vids, key=lambda v: (self._versions[v].trained_at, v))
            return self._versions[best]

    def active_version_id(self, model_id: int) -> int | None:
        with self._lock:
            return self._active.get(model_id)

    def list_models_for_context(self, entity: str | None = None,
                                signal: str | None = None,
                                include_related: bool = False) -> list[Model]:
        """Models targeting the named context.

        With ``include_related`` the search widens to entities one
        relation hop away, keeping only targets whose signal has the
        same type as the named signal.
        """
        with self._lock:
            out = []
            want_type = None
            related_ids: set[int] = set()
            if include_related and entity is not None:
                related_ids = {e.id for e in self._context.related_entities(entity)}
                if signal is not None:
                    key = self._context.resolve_context(entity, signal)
                    want_type = self._context.signal_type_of(key.signal_id).id
            for model in self.models():
                ent = self._context.entity(model.target.entity_id)
                sig = self._context.signal(model.target.signal_id)
                direct = ((entity is None or ent.name == entity)
                          and (signal is None or sig.name == signal))
                if direct:
                    out.append(model)
                    continue
                if include_related and ent.id in related_ids:
                    if want_type is None or sig.type_id == want_type:
                        out.append(model)
            return out

    def model_hierarchy(self, entity: str | None = None,
                        signal: str | None = None) -> dict:
        """Deterministic tree of models and their versions."""
        with self._lock:
            chosen = (self.list_models_for_context(entity, signal)
                      if entity or signal else self.models())
            nodes = []
            for model in sorted(chosen, key=lambda m: (m.name, m.id)):
                versions = sorted(
                    (self._versions[v] for v in self._by_model[model.id]),
                    key=lambda v: (v.trained_at, v.id),
                )
                nodes.append({
                    "id": model.id,
                    "name": model.name,
                    "target": model.target_ref.to_json(),
                    "train_schedule": model.train_schedule.to_json(),
                    "versions": [
                        {
                            "id": v.id,
                            "trained_at": v.trained_at,
                            "created_at": v.created_at,
                            "metrics": v.metrics,
                            "active": self._active.get(model.id) == v.id,
                        }
                        for v in versions
                    ],
                })
            return {"models": nodes}

    # ------------------------------------------------------------------
    # parsing

    def _parse_model(self, doc: dict, model_id: int) -> Model:
        diag = _Diagnostics()
        name = str(doc.get("name", "")).strip()
        if not name:
            diag.add("name", "model needs a non-empty name")
        target_doc = doc.get("target") or {}
        target_ref = None
        target_key = None
        if "entity" not in target_doc or "signal" not in target_doc:
            diag.add("target", "target needs entity and signal")
        else:
            target_ref = ContextRef(str(target_doc["entity"]), str(target_doc["signal"]))
            try:
                target_key = self._context.resolve_context(
                    target_ref.entity, target_ref.signal)
            except Exception as exc:
                diag.add("target", str(exc))
        pipeline = parse_pipeline(doc.get("pipeline") or {}, diag)
        for i, ref in enumerate(pipeline.load.covariates):
            try:
                self._context.resolve_context(ref.entity, ref.signal)
            except Exception as exc:
                diag.add(f"load.covariates[{i}]", str(exc))
        train_schedule = None
        try:
            train_schedule = parse_deployment(
                doc.get("train_schedule") or {}, expect_task=TASK_TRAIN)
        except ValidationError as exc:
            diag.add("train_schedule", str(exc))
        score_template = None
        if doc.get("score_schedule"):
            try:
                score_template = parse_deployment(
                    doc["score_schedule"], expect_task=TASK_SCORE)
            except ValidationError as exc:
                diag.add("score_schedule", str(exc))
        diag.raise_if_any(f"model {name!r}" if name else "model")
        return Model(
            id=model_id,
            name=name,
            description=str(doc.get("description", "")),
            target=target_key,
            target_ref=target_ref,
            pipeline=pipeline,
            train_schedule=train_schedule,
            score_template=score_template,
            doc=doc,
        )

    # ------------------------------------------------------------------
    # persistence

    def _log(self, event: dict) -> None:
        if self._journal is not None:
            self._journal.append(event)

    def _apply(self, event: dict) -> None:
        op = event["op"]
        if op == "model":
            model = self._parse_model(event["doc"], event["id"])
            self._models[model.id] = model
            self._by_name[model.name] = model.id
            self._by_model.setdefault(model.id, [])
            self._next_model = max(self._next_model, model.id + 1)
            self._context.link_model(model.id, model.name, model.target)
        elif op == "version":
            schedule = (parse_deployment(event["score_schedule"])
                        if event.get("score_schedule") else None)
            version = ModelVersion(
                id=event["id"],
                model_id=event["model_id"],
                params=event["params"],
                trained_at=event["trained_at"],
                created_at=event["created_at"],
                score_schedule=schedule,
                metrics=event.get("metrics", {}),
            )
            self._versions[version.id] = version
            self._by_model.setdefault(version.model_id, [])
            if version.id not in self._by_model[version.model_id]:
                self._by_model[version.model_id].append(version.id)
            self._next_version = max(self._next_version, version.id + 1)
        elif op == "activate":
            self._active[event["model_id"]] = event["version_id"]

    def _state(self) -> dict:
        return {
            "models": [{"id": m.id, "doc": m.doc} for m in self.models()],
            "versions": [
                {
                    "id": v.id,
                    "model_id": v.model_id,
                    "params": v.params,
                    "trained_at": v.trained_at,
                    "created_at": v.created_at,
                    "score_schedule": (v.score_schedule.to_json()
                                       if v.score_schedule else None),
                    "metrics": v.metrics,
                }
                for _, v in sorted(self._versions.items())
            ],
            "active": {str(k): v for k, v in self._active.items()},
        }

    def _restore(self, state: dict) -> None:
        for row in state["models"]:
            self._apply({"op": "model", **row})
        for row in state["versions"]:
            self._apply({"op": "version", **row})
        for mid, vid in state.get("active", {}).items():
            self._active[int(mid)] = vid

    def snapshot(self) -> None:
        with self._lock:
            if self._journal is not None:
                self._journal.write_snapshot(self._state())

    def close(self) -> None:
        with self._lock:
            if self._journal is not None:
                self._journal.close()
