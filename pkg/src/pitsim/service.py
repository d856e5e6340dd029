"""Live control service: steps the engine in real time over a websocket.

One session owns one stepper. Incoming commands land in a queue that is
drained once per step, so a command is always applied at a step boundary and
never mid-step; every applied command is appended to the session log, which
makes any live session replayable offline. Outgoing frames fan out through
per-client bounded queues that drop oldest first, so a slow client can never
stall the stepper.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from . import engine, recording
from .engine import Command, CommandKind, SPEED_FACTORS
from .scenario import ScenarioConfig, scenario_to_obj

log = logging.getLogger("pitsim.service")

PROTOCOL_VERSION = 1
_CLIENT_QUEUE_FRAMES = 30

_COMMAND_KINDS = {
    "trigger_moshpit": CommandKind.TRIGGER_MOSHPIT,
    "trigger_circlepit": CommandKind.TRIGGER_CIRCLEPIT,
    "stop_behavior": CommandKind.STOP_BEHAVIOR,
}


def world_message(config: ScenarioConfig, state: engine.SimState) -> str:
    obj = scenario_to_obj(config)
    aoes = [dict(a, id=f"aoe{i}") for i, a in enumerate(obj["areas_of_effect"])]
    return json.dumps(
        {
            "type": "world",
            "version": PROTOCOL_VERSION,
            "bounds": obj["bounds"],
            "obstacles": obj["obstacles"],
            "goals": obj["goals"],
            "spawn_areas": obj["spawn_areas"],
            "areas_of_effect": aoes,
            "markers": [[m.position[0], m.position[1]] for m in state.field.markers],
            "params": obj["params"],
        },
        separators=(",", ":"),
    )


def _error_message(reason: str) -> str:
    return json.dumps({"type": "error", "reason": reason}, separators=(",", ":"))


def parse_client_message(raw: str) -> Command:
    """Decode one client message into a Command; raises ValueError on bad input."""
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        raise ValueError("malformed JSON") from None
    if not isinstance(obj, dict):
        raise ValueError("message must be a JSON object")
    msg_type = obj.get("type")
    if msg_type == "command":
        kind = _COMMAND_KINDS.get(obj.get("kind"))
        if kind is None:
            raise ValueError(f"unknown command kind {obj.get('kind')!r}")
        behavior_id = obj.get("behavior_id")
        if not isinstance(behavior_id, str) or not behavior_id:
            raise ValueError("command requires a behavior_id")
        return Command(kind, behavior_id=behavior_id, issued_at_ms=int(time.time() * 1000))
    if msg_type == "pause":
        return Command(CommandKind.PAUSE, issued_at_ms=int(time.time() * 1000))
    if msg_type == "resume":
        return Command(CommandKind.RESUME, issued_at_ms=int(time.time() * 1000))
    if msg_type == "set_speed":
        factor = obj.get("factor")
        if factor not in SPEED_FACTORS:
            raise ValueError(f"speed factor must be one of {list(SPEED_FACTORS)}")
        return Command(CommandKind.SET_SPEED, factor=float(factor), issued_at_ms=int(time.time() * 1000))
    raise ValueError(f"unknown message type {msg_type!r}")


class LiveSession:
    """A running simulation plus its connected clients."""

    def __init__(
        self,
        config: ScenarioConfig,
        *,
        broadcast_every: int = 1,
        record_path: str | None = None,
        duration: float | None = None,
        realtime: bool = True,
    ) -> None:
        self.config = config
        self.broadcast_every = max(1, broadcast_every)
        self.record_path = record_path
        self.duration = duration
        self.realtime = realtime
        self.state = engine.init(config)
        self.speed = 1.0
        self.paused = False
        self._resume = asyncio.Event()
        self._resume.set()
        self._pending: list[tuple[Command, object | None]] = []
        self._clients: dict[object, asyncio.Queue] = {}
        self._world = world_message(config, self.state)
        self._frames: list[str] = []
        self._applied: list[tuple[int, Command]] = []
        self._server = None
        self._stepper: asyncio.Task | None = None
        self.port: int | None = None

    # -- lifecycle --------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._server = await serve(self._handle_client, host, port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._stepper = asyncio.create_task(self._step_loop())
        log.info("session listening on %s:%d", host, self.port)

    async def wait_done(self) -> None:
        if self._stepper is not None:
            await self._stepper

    async def stop(self) -> None:
        if self._stepper is not None:
            self._stepper.cancel()
            try:
                await self._stepper
            except asyncio.CancelledError:
                pass
            self._stepper = None
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        self.write_record()

    def write_record(self) -> None:
        if not self.record_path:
            return
        by_step: dict[int, list[Command]] = {}
        for at_step, cmd in self._applied:
            by_step.setdefault(at_step, []).append(cmd)
        with open(self.record_path, "w", encoding="utf-8") as fh:
            fh.write(recording.meta_line(self.config, len(self._frames)) + "\n")
            for i, frame in enumerate(self._frames, start=1):
                for cmd in by_step.get(i, []):
                    fh.write(recording.command_line(i, cmd) + "\n")
                fh.write(frame + "\n")
        log.info("session log written to %s", self.record_path)

    # -- stepping ---------------------------------------------------------

    async def _step_loop(self) -> None:
        dt = self.state.dt
        total_steps = None
        if self.duration is not None:
            total_steps = engine.steps_for_duration(self.duration, dt)
        while total_steps is None or self.state.step_index < total_steps:
            await self._resume.wait()
            batch = self._pending
            self._pending = []
            behavior_cmds: list[Command] = []
            pacing_cmds: list[Command] = []
            issuers: dict[int, object | None] = {}
            for cmd, ws in batch:
                if cmd.kind is CommandKind.PAUSE:
                    self.paused = True
                    self._resume.clear()
                    pacing_cmds.append(cmd)
                elif cmd.kind is CommandKind.RESUME:
                    self.paused = False
                    self._resume.set()
                    pacing_cmds.append(cmd)
                elif cmd.kind is CommandKind.SET_SPEED:
                    self.speed = cmd.factor
                    pacing_cmds.append(cmd)
                else:
                    behavior_cmds.append(cmd)
                    issuers[id(cmd)] = ws
            if self.paused:
                # No step elapses while paused; pacing commands are logged
                # against the step that will run next. Behavior commands wait.
                upcoming = self.state.step_index + 1
                self._applied.extend((upcoming, cmd) for cmd in pacing_cmds)
                self._pending = [(cmd, issuers.get(id(cmd))) for cmd in behavior_cmds] + self._pending
                continue

            snap, applied, rejected = engine.step(self.state, behavior_cmds)
            step_idx = self.state.step_index
            self._applied.extend((step_idx, cmd) for cmd in pacing_cmds)
            self._applied.extend((step_idx, cmd) for cmd in applied if cmd.kind in _COMMAND_KINDS.values())
            for cmd, reason in rejected:
                ws = issuers.get(id(cmd))
                if ws is not None:
                    self._offer(ws, _error_message(reason))
            line = snap.to_line()
            self._frames.append(line)
            if step_idx % self.broadcast_every == 0:
                for ws in list(self._clients):
                    self._offer(ws, line)
            if self.realtime:
                await asyncio.sleep(dt / self.speed)
            else:
                await asyncio.sleep(0)
        log.info("session finished after %d steps", self.state.step_index)

    # -- client handling ----------------------------------------------------

    def _offer(self, ws, message: str) -> None:
        queue = self._clients.get(ws)
        if queue is None:
            return
        while queue.full():
            queue.get_nowait()  # drop oldest for slow clients
        queue.put_nowait(message)

    async def _sender(self, ws, queue: asyncio.Queue) -> None:
        while True:
            message = await queue.get()
            await ws.send(message)

    async def _handle_client(self, ws) -> None:
        queue: asyncio.Queue = asyncio.Queue(maxsize=_CLIENT_QUEUE_FRAMES)
        self._clients[ws] = queue
        sender = asyncio.create_task(self._sender(ws, queue))
        try:
            await ws.send(self._world)
            async for raw in ws:
                try:
                    cmd = parse_client_message(raw)
                except ValueError as exc:
                    self._offer(ws, _error_message(str(exc)))
                    continue
                self._pending.append((cmd, ws))
                if cmd.kind is CommandKind.RESUME:
                    # Wake the stepper so the resume is processed promptly.
                    self.paused = False
                    self._resume.set()
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self._clients.pop(ws, None)


async def _serve_forever(session: LiveSession, host: str, port: int) -> None:
    await session.start(host, port)
    print(f"pitsim session on ws://{host}:{session.port} (Ctrl-C to stop)")
    try:
        await session.wait_done()
    finally:
        await session.stop()


def serve_session(
    config: ScenarioConfig,
    *,
    host: str = "127.0.0.1",
    port: int = 8765,
    broadcast_every: int = 1,
    record_path: str | None = None,
    duration: float | None = None,
) -> None:
    """Blocking entry point used by the CLI."""
    session = LiveSession(
        config,
        broadcast_every=broadcast_every,
        record_path=record_path,
        duration=duration,
    )
    try:
        asyncio.run(_serve_forever(session, host, port))
    except KeyboardInterrupt:
        session.write_record()
