"""Semantic context graph: entity/signal taxonomy, relations, resolution.

Everything else in the system is keyed by a ContextKey (entity, signal);
this store owns those identities plus the hierarchical (PARENT_OF) and
topological (CONNECTED_TO) structure between entities, and exports the
layered graph document the dashboard renders.

Concurrency: one store-wide lock; every query returns immutable dataclasses
or fresh containers, safe to hand between threads.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Optional

from ..errors import (
    Ambiguous,
    CycleError,
    NotFound,
    SelfEdge,
    UnknownEntityType,
    UnknownSignalType,
    ValidationError,
)
from ..persist import Journal

PARENT_OF = "PARENT_OF"
CONNECTED_TO = "CONNECTED_TO"


@dataclass(frozen=True)
class EntityType:
    id: int
    name: str


@dataclass(frozen=True)
class SignalType:
    id: int
    name: str


@dataclass(frozen=True)
class Entity:
    id: int
    name: str
    type_id: int
    geo: Optional[tuple[float, float]] = None  # (lat, lon)


@dataclass(frozen=True)
class Signal:
    id: int
    name: str
    type_id: int
    unit: str = ""


@dataclass(frozen=True)
class Relation:
    kind: str
    from_id: int
    to_id: int


@dataclass(frozen=True)
class ContextKey:
    entity_id: int
    signal_id: int


class ContextStore:
    def __init__(self, data_dir: str | None = None, fsync: bool = True):
        self._lock = threading.RLock()
        self._entity_types: dict[int, EntityType] = {}
        self._signal_types: dict[int, SignalType] = {}
        self._entities: dict[int, Entity] = {}
        self._signals: dict[int, Signal] = {}
        self._parent_edges: set[tuple[int, int]] = set()     # (parent, child)
        self._connected_edges: set[tuple[int, int]] = set()  # normalized (lo, hi)
        self._bound_series: set[tuple[int, int]] = set()     # (entity_id, signal_id)
        self._model_links: dict[int, tuple[str, int, int]] = {}  # model_id -> (name, eid, sid)
        self._next_id = 1
        self._journal = Journal(data_dir, "context", fsync=fsync) if data_dir else None
        if self._journal is not None:
            self._replay()

    # ------------------------------------------------------------------
    # persistence

    def _log(self, event: dict) -> None:
        if self._journal is not None:
            self._journal.append(event)

    def _replay(self) -> None:
        state, events = self._journal.load()
        if state is not None:
            self._restore(state)
        for ev in events:
            self._apply(ev)

    def _apply(self, ev: dict) -> None:
        op = ev["op"]
        if op == "entity_type":
            self._entity_types[ev["id"]] = EntityType(ev["id"], ev["name"])
        elif op == "signal_type":
            self._signal_types[ev["id"]] = SignalType(ev["id"], ev["name"])
        elif op == "entity":
            geo = tuple(ev["geo"]) if ev.get("geo") else None
            self._entities[ev["id"]] = Entity(ev["id"], ev["name"], ev["type_id"], geo)
        elif op == "signal":
            self._signals[ev["id"]] = Signal(ev["id"], ev["name"], ev["type_id"], ev.get("unit", ""))
        elif op == "relation":
            if ev["kind"] == PARENT_OF:
                self._parent_edges.add((ev["from_id"], ev["to_id"]))
            else:
                lo, hi = sorted((ev["from_id"], ev["to_id"]))
                self._connected_edges.add((lo, hi))
        elif op == "bind_series":
            self._bound_series.add((ev["entity_id"], ev["signal_id"]))
        elif op == "link_model":
            self._model_links[ev["model_id"]] = (ev["name"], ev["entity_id"], ev["signal_id"])
        self._next_id = max(self._next_id, ev.get("id", 0) + 1)

    def _restore(self, state: dict) -> None:
        for ev in state["events"]:
            self._apply(ev)
        self._next_id = state["next_id"]

    def _state(self) -> dict:
        events = []
        for t in self._entity_types.values():
            events.append({"op": "entity_type", "id": t.id, "name": t.name})
        for t in self._signal_types.values():
            events.append({"op": "signal_type", "id": t.id, "name": t.name})
        for e in self._entities.values():
            events.append({"op": "entity", "id": e.id, "name": e.name,
                           "type_id": e.type_id, "geo": list(e.geo) if e.geo else None})
        for s in self._signals.values():
            events.append({"op": "signal", "id": s.id, "name": s.name,
                           "type_id": s.type_id, "unit": s.unit})
        for p, c in sorted(self._parent_edges):
            events.append({"op": "relation", "kind": PARENT_OF, "from_id": p, "to_id": c})
        for a, b in sorted(self._connected_edges):
            events.append({"op": "relation", "kind": CONNECTED_TO, "from_id": a, "to_id": b})
        for e, s in sorted(self._bound_series):
            events.append({"op": "bind_series", "entity_id": e, "signal_id": s})
        for mid, (name, e, s) in sorted(self._model_links.items()):
            events.append({"op": "link_model", "model_id": mid, "name": name,
                           "entity_id": e, "signal_id": s})
        return {"events": events, "next_id": self._next_id}

    def snapshot(self) -> None:
        if self._journal is None:
            return
        with self._lock:
            self._journal.write_snapshot(self._state())

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()

    # ------------------------------------------------------------------
    # taxonomy

    def add_entity_type(self, name: str) -> EntityType:
        with self._lock:
            existing = self._by_name(self._entity_types, name)
            if existing is not None:
                return existing
            etype = EntityType(self._fresh_id(), name)
            self._entity_types[etype.id] = etype
            self._log({"op": "entity_type", "id": etype.id, "name": name})
            return etype

    def add_signal_type(self, name: str) -> SignalType:
        with self._lock:
            existing = self._by_name(self._signal_types, name)
            if existing is not None:
                return existing
            stype = SignalType(self._fresh_id(), name)
            self._signal_types[stype.id] = stype
            self._log({"op": "signal_type", "id": stype.id, "name": name})
            return stype

    def upsert_entity(self, name: str, type_name: str,
                      geo: Optional[tuple[float, float]] = None) -> Entity:
        with self._lock:
            etype = self._by_name(self._entity_types, type_name)
            if etype is None:
                raise UnknownEntityType(f"entity type {type_name!r} is not registered")
            if geo is not None:
                lat, lon = float(geo[0]), float(geo[1])
                if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                    raise ValueError(f"geo out of range: ({lat}, {lon})")
                geo = (lat, lon)
            for ent in self._entities.values():
                if ent.name == name and ent.type_id == etype.id:
                    if geo is not None and ent.geo != geo:
                        ent = Entity(ent.id, name, etype.id, geo)
                        self._entities[ent.id] = ent
                        self._log({"op": "entity", "id": ent.id, "name": name,
                                   "type_id": etype.id, "geo": list(geo)})
                    return ent
            ent = Entity(self._fresh_id(), name, etype.id, geo)
            self._entities[ent.id] = ent
            self._log({"op": "entity", "id": ent.id, "name": name, "type_id": etype.id,
                       "geo": list(geo) if geo else None})
            return ent

    def upsert_signal(self, name: str, type_name: str, unit: str = "") -> Signal:
        with self._lock:
            stype = self._by_name(self._signal_types, type_name)
            if stype is None:
                raise UnknownSignalType(f"signal type {type_name!r} is not registered")
            for sig in self._signals.values():
                if sig.name == name and sig.type_id == stype.id:
                    return sig
            sig = Signal(self._fresh_id(), name, stype.id, unit)
            self._signals[sig.id] = sig
            self._log({"op": "signal", "id": sig.id, "name": name,
                       "type_id": stype.id, "unit": unit})
            return sig

    # ------------------------------------------------------------------
    # relations

    def add_relation(self, kind: str, from_entity, to_entity) -> Relation:
        if kind not in (PARENT_OF, CONNECTED_TO):
            raise ValidationError(f"unknown relation kind {kind!r}")
        with self._lock:
            src = self._entity_ref(from_entity)
            dst = self._entity_ref(to_entity)
            if src.id == dst.id:
                raise SelfEdge(f"relation {kind} from {src.name!r} to itself")
            if kind == PARENT_OF:
                if self._reaches(dst.id, src.id):
                    raise CycleError(
                        f"PARENT_OF({src.name!r}, {dst.name!r}) would create a cycle")
                edge = (src.id, dst.id)
                if edge not in self._parent_edges:
                    self._parent_edges.add(edge)
                    self._log({"op": "relation", "kind": kind,
                               "from_id": src.id, "to_id": dst.id})
                    assert self._parent_acyclic(), "PARENT_OF subgraph must stay acyclic"
            else:
                lo, hi = sorted((src.id, dst.id))
                if (lo, hi) not in self._connected_edges:
                    self._connected_edges.add((lo, hi))
                    self._log({"op": "relation", "kind": kind, "from_id": lo, "to_id": hi})
            return Relation(kind, src.id, dst.id)

    def _reaches(self, start: int, goal: int) -> bool:
        """DFS over PARENT_OF from start; True if goal is reachable."""
        stack, seen = [start], set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(c for p, c in self._parent_edges if p == node)
        return False

    def _parent_acyclic(self) -> bool:
        return not any(self._reaches(c, p) for p, c in self._parent_edges)

    # ------------------------------------------------------------------
    # resolution and traversal

    def resolve_context(self, entity_name: str, signal_name: str, *,
                        entity_type: str | None = None,
                        signal_type: str | None = None) -> ContextKey:
        with self._lock:
            ent = self._resolve_entity(entity_name, entity_type)
            sig = self._resolve_signal(signal_name, signal_type)
            return ContextKey(ent.id, sig.id)

    def _resolve_entity(self, name: str, type_name: str | None = None) -> Entity:
        cands = [e for e in self._entities.values() if e.name == name]
        if type_name is not None:
            etype = self._by_name(self._entity_types, type_name)
            cands = [e for e in cands if etype is not None and e.type_id == etype.id]
        if not cands:
            raise NotFound(f"entity {name!r} not found")
        if len(cands) > 1:
            types = sorted(self._entity_types[e.type_id].name for e in cands)
            raise Ambiguous(f"entity name {name!r} exists under types {types}")
        return cands[0]

    def _resolve_signal(self, name: str, type_name: str | None = None) -> Signal:
        cands = [s for s in self._signals.values() if s.name == name]
        if type_name is not None:
            stype = self._by_name(self._signal_types, type_name)
            cands = [s for s in cands if stype is not None and s.type_id == stype.id]
        if not cands:
            raise NotFound(f"signal {name!r} not found")
        if len(cands) > 1:
            types = sorted(self._signal_types[s.type_id].name for s in cands)
            raise Ambiguous(f"signal name {name!r} exists under types {types}")
        return cands[0]

    def descendants(self, entity, max_depth: int | None = None) -> list[Entity]:
        """PARENT_OF-reachable entities in breadth-first, then id order."""
        with self._lock:
            root = self._entity_ref(entity)
            out: list[Entity] = []
            seen = {root.id}
            frontier = [root.id]
            depth = 0
            while frontier and (max_depth is None or depth < max_depth):
                nxt = sorted({c for p, c in self._parent_edges
                              if p in frontier and c not in seen})
                out.extend(self._entities[c] for c in nxt)
                seen.update(nxt)
                frontier = nxt
                depth += 1
            return out

    def related_entities(self, entity) -> list[Entity]:
        """Entities one PARENT_OF hop (either direction) or CONNECTED_TO away."""
        with self._lock:
            root = self._entity_ref(entity)
            ids: set[int] = set()
            for p, c in self._parent_edges:
                if p == root.id:
                    ids.add(c)
                elif c == root.id:
                    ids.add(p)
            for a, b in self._connected_edges:
                if a == root.id:
                    ids.add(b)
                elif b == root.id:
                    ids.add(a)
            return [self._entities[i] for i in sorted(ids)]

    # ------------------------------------------------------------------
    # series / model bookkeeping

    def bind_series(self, key: ContextKey) -> None:
        with self._lock:
            self.check_key(key)
            pair = (key.entity_id, key.signal_id)
            if pair in self._bound_series:
                return
            self._bound_series.add(pair)
            self._log({"op": "bind_series", "entity_id": pair[0], "signal_id": pair[1]})

    def is_bound(self, key: ContextKey) -> bool:
        with self._lock:
            return (key.entity_id, key.signal_id) in self._bound_series

    def link_model(self, model_id: int, name: str, key: ContextKey) -> None:
        with self._lock:
            self.check_key(key)
            self._model_links[model_id] = (name, key.entity_id, key.signal_id)
            self._log({"op": "link_model", "model_id": model_id, "name": name,
                       "entity_id": key.entity_id, "signal_id": key.signal_id})

    def check_key(self, key: ContextKey) -> None:
        if key.entity_id not in self._entities or key.signal_id not in self._signals:
            raise NotFound(f"unresolvable context key {key}")

    # ------------------------------------------------------------------
    # accessors

    def entity(self, entity_id: int) -> Entity:
        with self._lock:
            try:
                return self._entities[entity_id]
            except KeyError:
                raise NotFound(f"entity id {entity_id} not found") from None

    def signal(self, signal_id: int) -> Signal:
        with self._lock:
            try:
                return self._signals[signal_id]
            except KeyError:
                raise NotFound(f"signal id {signal_id} not found") from None

    def entities(self) -> list[Entity]:
        with self._lock:
            return sorted(self._entities.values(), key=lambda e: e.id)

    def signals(self) -> list[Signal]:
        with self._lock:
            return sorted(self._signals.values(), key=lambda s: s.id)

    def key_names(self, key: ContextKey) -> tuple[str, str]:
        with self._lock:
            return self.entity(key.entity_id).name, self.signal(key.signal_id).name

    def signal_type_of(self, signal_id: int) -> SignalType:
        with self._lock:
            return self._signal_types[self._signals[signal_id].type_id]

    # ------------------------------------------------------------------
    # graph export

    def export_context_graph(self) -> dict:
        """Layered node/edge document: entities, signals, series, models."""
        with self._lock:
            nodes: list[dict] = []
            edges: list[dict] = []
            for ent in sorted(self._entities.values(), key=lambda e: e.id):
                node = {"id": f"entity:{ent.id}", "kind": "entity", "label": ent.name}
                if ent.geo is not None:
                    node["geo"] = {"lat": ent.geo[0], "lon": ent.geo[1]}
                nodes.append(node)
            for sig in sorted(self._signals.values(), key=lambda s: s.id):
                nodes.append({"id": f"signal:{sig.id}", "kind": "signal", "label": sig.name})
            for eid, sid in sorted(self._bound_series):
                label = f"{self._entities[eid].name}/{self._signals[sid].name}"
                series_id = f"series:{eid}:{sid}"
                nodes.append({"id": series_id, "kind": "series", "label": label})
                edges.append({"from": series_id, "to": f"entity:{eid}", "kind": "LOCATED_AT"})
                edges.append({"from": series_id, "to": f"signal:{sid}", "kind": "MEASURES"})
            for mid, (name, eid, sid) in sorted(self._model_links.items()):
                model_node = f"model:{mid}"
                nodes.append({"id": model_node, "kind": "model", "label": name})
                if (eid, sid) in self._bound_series:
                    edges.append({"from": model_node, "to": f"series:{eid}:{sid}",
                                  "kind": "TARGETS"})
                else:
                    edges.append({"from": model_node, "to": f"entity:{eid}", "kind": "TARGETS"})
                    edges.append({"from": model_node, "to": f"signal:{sid}", "kind": "TARGETS"})
            for p, c in sorted(self._parent_edges):
                edges.append({"from": f"entity:{p}", "to": f"entity:{c}", "kind": PARENT_OF})
            for a, b in sorted(self._connected_edges):
                edges.append({"from": f"entity:{a}", "to": f"entity:{b}", "kind": CONNECTED_TO})
            return {"nodes": nodes, "edges": edges}

    # ------------------------------------------------------------------
    # internals

    def _fresh_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    @staticmethod
    def _by_name(table: dict, name: str):
        for item in table.values():
            if item.name == name:
                return item
        return None

    def _entity_ref(self, ref) -> Entity:
        if isinstance(ref, Entity):
            return self.entity(ref.id)
        if isinstance(ref, int):
            return self.entity(ref)
        return self._resolve_entity(str(ref))
