"""HTTP game service: a human packs a sequence against the engine.

Every game is persisted as an append-only event log (creation metadata
plus committed cells), so the full state is reconstructible after a
restart by replaying the log.  Mutating requests for a game are
serialized by a per-game lock; there is no shared mutable state across
games.  All endpoints live under ``/v1/``.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field, replace as dc_replace
from fractions import Fraction
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from binpack3d import __version__
from binpack3d.core import (
    BOTH_ORIENTATIONS,
    DEFAULT_ORIENTATIONS,
    Action,
    BinConfig,
    EpisodeState,
    Orientation,
    compute_mask,
    new_episode,
    place,
    rest_height,
    step,
)
from binpack3d.datagen import ItemSequence, Origin, generate_sequence, read_dataset
from binpack3d.episodes import run_episode
from binpack3d.reports import RunConfig, make_solver


@dataclass(frozen=True)
class ServiceSettings:
    """What the service packs and which solver plays the machine side."""

    store: Path
    bin: BinConfig = BinConfig(10, 10, 10)
    origin: Origin = Origin.CUT2
    dim_min: int = 2
    dim_max: int = 5
    swap_lw: bool = False
    policy: str = "boundary"
    aggregate: str = "mean"
    volume_scale: str = "1"
    k: int = 1
    simulations: int = 600
    exploration: float = 1.0
    search_seed: int = 0
    estimator: str = "free-volume"
    dataset: tuple[ItemSequence, ...] = ()

    def solver_config(self, seed: int) -> RunConfig:
        return RunConfig(
            bin=self.bin,
            origin=self.origin,
            count=1,
            seed=seed,
            dim_min=self.dim_min,
            dim_max=self.dim_max,
            policy=self.policy,
            aggregate=self.aggregate,
            volume_scale=self.volume_scale,
            k=self.k,
            simulations=self.simulations,
            exploration=self.exploration,
            search_seed=self.search_seed,
            estimator=self.estimator,
            swap_lw=self.swap_lw,
        )


def load_settings_dataset(settings: ServiceSettings, path: str | Path) -> ServiceSettings:
    """Attach a dataset file for index-based game creation."""
    sequences = tuple(read_dataset(path))
    for i, seq in enumerate(sequences):
        if seq.bin != settings.bin:
            raise ValueError(f"dataset sequence {i} bin {seq.bin} != service bin {settings.bin}")
    return dc_replace(settings, dataset=sequences)


# ---------------------------------------------------------------------------
# request/response bodies
# ---------------------------------------------------------------------------


class CreateGameReq(BaseModel):
    seed: int | None = None
    dataset_index: int | None = Field(default=None, ge=0)
    swap_lw: bool | None = None


class CellReq(BaseModel):
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    orientation: int = Field(default=0, ge=0, le=1)


# ---------------------------------------------------------------------------
# game runtime and persistence
# ---------------------------------------------------------------------------


@dataclass
class Game:
    game_id: str
    sequence: ItemSequence
    swap_lw: bool
    state: EpisodeState
    rewards: list[Fraction] = field(default_factory=list)
    ai_items: int = 0
    ai_utilization: Fraction = Fraction(0)


class GameStore:
    """One JSONL event log per game under a directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry = threading.Lock()

    def lock(self, game_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(game_id, threading.Lock())

    def path(self, game_id: str) -> Path:
        return self.directory / f"{game_id}.jsonl"

    def exists(self, game_id: str) -> bool:
        return self.path(game_id).is_file()

    def append(self, game_id: str, event: dict) -> None:
        with self.path(game_id).open("a") as fh:
            fh.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")

    def events(self, game_id: str) -> list[dict]:
        return [json.loads(line) for line in self.path(game_id).read_text().splitlines()]


def _fresh_state(sequence: ItemSequence, swap_lw: bool = False) -> EpisodeState:
    orientations = BOTH_ORIENTATIONS if swap_lw else DEFAULT_ORIENTATIONS
    return new_episode(sequence.bin, sequence.items, orientations=orientations)


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="binpack3d game service", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = GameStore(settings.store)
    games: dict[str, Game] = {}
    games_lock = threading.Lock()

    def replay_ai(sequence: ItemSequence, swap_lw: bool) -> tuple[int, Fraction]:
        solver = make_solver(settings.solver_config(sequence.seed))
        result = run_episode(_fresh_state(sequence, swap_lw=swap_lw), solver)
        return result.items_placed, result.utilization

    def build_game(game_id: str, seed: int, swap_lw: bool, actions: list[dict]) -> Game:
        sequence = generate_sequence(
            settings.origin, settings.bin, seed, settings.dim_min, settings.dim_max
        )
        state = _fresh_state(sequence, swap_lw=swap_lw)
        ai_items, ai_uti = replay_ai(sequence, swap_lw)
        game = Game(
            game_id=game_id,
            sequence=sequence,
            swap_lw=swap_lw,
            state=state,
            ai_items=ai_items,
            ai_utilization=ai_uti,
        )
        for cell in actions:
            action = Action(
                x=cell["x"], y=cell["y"], orientation=Orientation(cell["orientation"])
            )
            game.state, reward = step(game.state, action)
            game.rewards.append(reward)
        return game

    def load_game(game_id: str) -> Game:
        with games_lock:
            cached = games.get(game_id)
        if cached is not None:
            return cached
        if not store.exists(game_id):
            raise HTTPException(status_code=404, detail=f"unknown game id {game_id!r}")
        events = store.events(game_id)
        created = events[0]
        actions: list[dict] = []
        for event in events[1:]:
            if event["event"] == "commit":
                actions.append(event["cell"])
            elif event["event"] == "reset":
                actions.clear()
        game = build_game(game_id, created["seed"], created["swap_lw"], actions)
        with games_lock:
            games[game_id] = game
        return game

    def mask_grids(state: EpisodeState):
        item = state.current_item
        if item is None:
            return None
        return compute_mask(state.height_map, item, state.orientations)

    def view(game: Game) -> dict:
        state = game.state
        mask = mask_grids(state)
        item = state.current_item
        human_uti = Fraction(state.packed_volume, state.bin.volume)
        return {
            "game_id": game.game_id,
            "bin": [state.bin.L, state.bin.W, state.bin.H],
            "origin": game.sequence.origin.value,
            "seed": game.sequence.seed,
            "swap_lw": game.swap_lw,
            "sequence_length": len(game.sequence.items),
            "height_map": state.height_map.grid.ravel(order="C").tolist(),
            "packed": [
                {
                    "l": p.dims[0],
                    "w": p.dims[1],
                    "h": p.dims[2],
                    "x": p.x,
                    "y": p.y,
                    "z": p.z,
                    "orientation": int(p.orientation),
                }
                for p in state.packed
            ],
            "current_item": list(item.dims) if item is not None else None,
            "mask": None
            if mask is None
            else [grid.astype(int).ravel(order="C").tolist() for grid in mask.grids],
            "done": state.done,
            "human": {
                "items": len(state.packed),
                "utilization": float(human_uti),
                "utilization_exact": str(human_uti),
            },
            "ai": {
                "items": game.ai_items,
                "utilization": float(game.ai_utilization),
                "utilization_exact": str(game.ai_utilization),
            },
        }

    def require_cell(game: Game, cell: CellReq) -> Action:
        state = game.state
        if state.done:
            raise HTTPException(status_code=409, detail="game is finished; reset to continue")
        orientation = Orientation(cell.orientation)
        if orientation not in state.orientations:
            raise HTTPException(
                status_code=409, detail="orientation is not enabled for this game"
            )
        mask = mask_grids(state)
        oi = state.orientations.index(orientation)
        L, W = state.bin.L, state.bin.W
        if cell.x >= L or cell.y >= W or not bool(mask.grids[oi, cell.x, cell.y]):
            raise HTTPException(
                status_code=409,
                detail=f"cell ({cell.x}, {cell.y}, o={cell.orientation}) is not placeable",
            )
        return Action(x=cell.x, y=cell.y, orientation=orientation)

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "engine": __version__}

    @app.post("/v1/games", status_code=201)
    def create_game(body: CreateGameReq):
        if (body.seed is None) == (body.dataset_index is None):
            raise HTTPException(
                status_code=422, detail="provide exactly one of seed or dataset_index"
            )
        if body.dataset_index is not None:
            if body.dataset_index >= len(settings.dataset):
                raise HTTPException(
                    status_code=404,
                    detail=f"dataset index {body.dataset_index} out of range"
                    f" (service holds {len(settings.dataset)} sequences)",
                )
            seed = settings.dataset[body.dataset_index].seed
        else:
            seed = body.seed
        swap_lw = settings.swap_lw if body.swap_lw is None else body.swap_lw
        game_id = uuid.uuid4().hex[:12]
        with store.lock(game_id):
            store.append(
                game_id,
                {
                    "event": "created",
                    "bin": [settings.bin.L, settings.bin.W, settings.bin.H],
                    "origin": settings.origin.value,
                    "seed": seed,
                    "dim_min": settings.dim_min,
                    "dim_max": settings.dim_max,
                    "swap_lw": swap_lw,
                },
            )
            game = build_game(game_id, seed, swap_lw, [])
            with games_lock:
                games[game_id] = game
        return view(game)

    @app.get("/v1/games/{game_id}")
    def get_game(game_id: str):
        return view(load_game(game_id))

    @app.post("/v1/games/{game_id}/preview")
    def preview(game_id: str, cell: CellReq):
        game = load_game(game_id)
        with store.lock(game_id):
            action = require_cell(game, cell)
            item = game.state.current_item
            le, we = item.footprint(action.orientation)
            z = rest_height(game.state.height_map, le, we, action.x, action.y)
            virtual = place(game.state.height_map, item, action.orientation, action.x, action.y)
        return {
            "height_map": virtual.grid.ravel(order="C").tolist(),
            "z": z,
            "item": list(item.dims),
        }

    @app.post("/v1/games/{game_id}/commit")
    def commit(game_id: str, cell: CellReq):
        game = load_game(game_id)
        with store.lock(game_id):
            action = require_cell(game, cell)
            store.append(
                game_id,
                {
                    "event": "commit",
                    "cell": {"x": cell.x, "y": cell.y, "orientation": cell.orientation},
                },
            )
            game.state, reward = step(game.state, action)
            game.rewards.append(reward)
        return {
            "reward": float(reward),
            "reward_exact": str(reward),
            "done": game.state.done,
            "view": view(game),
        }

    @app.get("/v1/games/{game_id}/suggestion")
    def suggestion(game_id: str):
        game = load_game(game_id)
        if game.state.done:
            return {"action": None, "done": True}
        solver = make_solver(settings.solver_config(game.sequence.seed))
        action = solver.decide(game.state)
        return {
            "action": {
                "x": action.x,
                "y": action.y,
                "orientation": int(action.orientation),
            },
            "done": False,
        }

    @app.get("/v1/games/{game_id}/ai")
    def ai_replay(game_id: str):
        game = load_game(game_id)
        return {
            "items": game.ai_items,
            "utilization": float(game.ai_utilization),
            "utilization_exact": str(game.ai_utilization),
            "sequence_length": len(game.sequence.items),
        }

    @app.post("/v1/games/{game_id}/reset")
    def reset(game_id: str):
        game = load_game(game_id)
        with store.lock(game_id):
            store.append(game_id, {"event": "reset"})
            game.state = _fresh_state(game.sequence, swap_lw=game.swap_lw)
            game.rewards.clear()
        return view(game)

    return app
