# src/data/synth.py
"""
Deterministic synthetic provenance logs for desk-scale experiments.

Benign activity is one simulated day of process trees whose members follow
one of four session templates (shell, fileio, network, ipc). Attack campaigns
are appended at a point in the day and labeled node by node. Each attack knob
targets one view:

- novel_tokens: attack entities carry attribute text unseen in benign data
- rare_motif:   non-CLONE attack edges run object -> process
- rare_event:   attack edges gain an event type never seen on that pair of
                entity types in the benign log

Every event has the acting process as its source.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from src.config import AttackConfig, PathsConfig, SynthConfig
from src.data.events import EVENT_TYPES, EntityType, Event, EventType, write_events
from src.errors import ConfigError, EmptyCorpus, UnknownScenario
from src.metrics.detection import CampaignLabels, write_labels

logger = logging.getLogger(__name__)

DAY_START_NS = 1_522_972_800 * 10**9
DAY_NS = 86_400 * 10**9
SECOND_NS = 10**9

SCENARIOS = ("exfiltration-chain", "dropper", "backdoor-netflow")
TEMPLATES = ("shell", "fileio", "network", "ipc")

P, F, N = EntityType.PROCESS, EntityType.FILE, EntityType.NETFLOW

# ---- benign vocabulary ------------------------------------------------------

COMMANDS = {
    "shell": [
        "/bin/bash",
        "/bin/bash -c ls -la",
        "/usr/bin/ls --color=auto",
        "/usr/bin/cat /etc/hosts",
        "/usr/bin/grep -r TODO .",
        "/usr/bin/ps aux",
    ],
    "fileio": [
        "/usr/bin/vim notes.txt",
        "/usr/bin/cp -r docs backup",
        "/usr/bin/python3 report.py",
        "/usr/bin/tar -czf archive.tgz docs",
        "/usr/bin/rsync -a docs backup",
    ],
    "network": [
        "/usr/bin/curl -s https://example.com",
        "/usr/bin/wget -q http://mirror.local/pkg.deb",
        "/usr/lib/firefox/firefox",
        "/usr/bin/apt-get update",
        "/usr/sbin/ntpd -g",
    ],
    "ipc": [
        "/usr/bin/dbus-daemon --session",
        "/usr/lib/systemd/systemd-journald",
        "/usr/sbin/rsyslogd -n",
        "/usr/lib/xorg/Xorg :0",
    ],
}
ROOT_COMMAND = "/sbin/init splash"

FILE_CATEGORIES = {
    "bin": (0.15, ["/usr/bin/{}", "/bin/{}", "/usr/sbin/{}"],
            ["bash", "ls", "cat", "grep", "vim", "cp", "tar", "curl", "wget", "python3", "rsync", "ps"]),
    "etc": (0.15, ["/etc/{}", "/etc/default/{}"],
            ["hosts", "passwd", "resolv.conf", "bash.bashrc", "locale.conf", "ntp.conf", "apt.conf"]),
    "lib": (0.2, ["/usr/lib/x86_64-linux-gnu/{}", "/lib/x86_64-linux-gnu/{}"],
            ["libc.so.6", "libssl.so.3", "libz.so.1", "libm.so.6", "libpthread.so.0", "libcurl.so.4"]),
    "docs": (0.35, ["/home/user{u}/docs/{}", "/home/user{u}/projects/{}"],
             ["report.txt", "notes.md", "data.csv", "draft.docx", "plan.pdf", "todo.txt", "main.py"]),
    "logs": (0.15, ["/var/log/{}", "/var/log/apt/{}"],
             ["syslog", "auth.log", "kern.log", "history.log", "Xorg.0.log", "journal.log"]),
}
WEB_PEERS = ["142.250.80.46", "157.240.1.35", "52.94.236.248", "13.107.42.14", "151.101.1.140", "104.18.32.68"]
WEB_PORTS = [80, 443]
LOCAL_PORTS = [631, 5353, 6000, 8080, 9090]

# ---- attack vocabulary ------------------------------------------------------

NOVEL_PROCESS_ATTRS = [
    "/dev/shm/.kworkerd --beacon 30",
    "/tmp/.X11-unix/.sshd-helper -q",
    "/var/tmp/.cache/updater --silent",
]
NOVEL_FILE_ATTRS = [
    "/dev/shm/.xq/dump{}.gz",
    "/var/tmp/.cache/stage{}.bin",
    "/tmp/.X11-unix/.k{}.dat",
]
NOVEL_NETFLOW_ATTRS = ["203.0.113.50:4444", "198.51.100.25:8443", "198.51.100.10:1337"]


@dataclass(frozen=True)
class _Entity:
    id: str
    type: EntityType
    attr: str


def _event(src: _Entity, dst: _Entity, event: EventType, ts: int) -> Event:
    return Event(src.id, src.type, src.attr, dst.id, dst.type, dst.attr, event, int(ts))


# ---- benign -----------------------------------------------------------------


def _file_pool(count: int, rng: np.random.Generator) -> dict[str, list[_Entity]]:
    pool: dict[str, list[_Entity]] = {name: [] for name in FILE_CATEGORIES}
    names = list(FILE_CATEGORIES)
    shares = np.array([FILE_CATEGORIES[n][0] for n in names])
    picks = rng.choice(len(names), size=count, p=shares / shares.sum())
    for i, cat_idx in enumerate(picks):
        cat = names[cat_idx]
        _, dirs, leaves = FILE_CATEGORIES[cat]
        template = dirs[rng.integers(len(dirs))]
        path = template.replace("{u}", str(rng.integers(10))).format(leaves[rng.integers(len(leaves))])
        pool[cat].append(_Entity(f"file-{i:06d}", F, path))
    return pool


def _netflow_pool(count: int, rng: np.random.Generator) -> dict[str, list[_Entity]]:
    pool: dict[str, list[_Entity]] = {"web": [], "local": []}
    for i in range(count):
        if rng.random() < 0.7:
            attr = f"{WEB_PEERS[rng.integers(len(WEB_PEERS))]}:{WEB_PORTS[rng.integers(len(WEB_PORTS))]}"
            pool["web"].append(_Entity(f"net-{i:06d}", N, attr))
        else:
            attr = f"127.0.0.1:{LOCAL_PORTS[rng.integers(len(LOCAL_PORTS))]}"
            pool["local"].append(_Entity(f"net-{i:06d}", N, attr))
    return pool


def _pick(pool: dict[str, list[_Entity]], category: str, rng: np.random.Generator) -> _Entity | None:
    """Entity from `category`, falling back to any category when it is empty."""
    choices = pool.get(category) or [e for group in pool.values() for e in group]
    if not choices:
        return None
    return choices[rng.integers(len(choices))]


def _session(
    template: str,
    proc: _Entity,
    t0: int,
    files: dict[str, list[_Entity]],
    flows: dict[str, list[_Entity]],
    rng: np.random.Generator,
) -> list[Event]:
    out: list[Event] = []
    clock = [t0]

    def emit(obj: _Entity | None, *events: EventType) -> None:
        if obj is None:
            return
        for ev in events:
            clock[0] += int(rng.integers(1, 5)) * SECOND_NS
            out.append(_event(proc, obj, ev, clock[0]))

    E = EventType
    if template == "shell":
        emit(_pick(files, "bin", rng), E.EXECUTE)
        emit(_pick(files, "etc", rng), E.OPEN, E.READ)
        emit(_pick(files, "lib", rng), E.OPEN, E.READ)
    elif template == "fileio":
        for _ in range(int(rng.integers(1, 4))):
            emit(_pick(files, "docs", rng), E.OPEN, E.READ)
        emit(_pick(files, "docs", rng), E.OPEN, E.WRITE)
    elif template == "network":
        emit(_pick(files, "lib", rng), E.OPEN, E.READ)
        for _ in range(int(rng.integers(1, 3))):
            emit(_pick(flows, "web", rng), E.CONNECT, E.SENDTO, E.RECVFROM)
    elif template == "ipc":
        emit(_pick(flows, "local", rng), E.SENDMSG, E.RECVMSG)
        emit(_pick(files, "logs", rng), E.OPEN, E.WRITE)
    return out


def _template_choice(weights: dict[str, float]) -> tuple[list[str], np.ndarray]:
    unknown = set(weights) - set(TEMPLATES)
    if unknown:
        raise ConfigError(f"unknown session templates {sorted(unknown)}; expected {TEMPLATES}")
    names = [t for t in TEMPLATES if weights.get(t, 0) > 0]
    p = np.array([weights[t] for t in names], dtype=np.float64)
    return names, p / p.sum()


def generate_benign(config: SynthConfig, seed: int) -> list[Event]:
    """One simulated day of benign activity, sorted by timestamp."""
    if config.processes == 0:
        return []
    rng = np.random.default_rng(seed)
    files = _file_pool(config.files, rng)
    flows = _netflow_pool(config.netflows, rng)
    names, probs = _template_choice(config.template_weights)

    # spawn times leave an hour for the last sessions to finish inside the day
    spawn = np.sort(rng.integers(0, DAY_NS - 3600 * SECOND_NS, size=config.processes))
    spawn[0] = 0
    procs: list[_Entity] = [_Entity("proc-000000", P, ROOT_COMMAND)]
    events: list[Event] = []
    for i in range(1, config.processes):
        template = names[rng.choice(len(names), p=probs)]
        cmds = COMMANDS[template]
        proc = _Entity(f"proc-{i:06d}", P, cmds[rng.integers(len(cmds))])
        parent = procs[int(rng.integers(i))]
        t = DAY_START_NS + int(spawn[i])
        events.append(_event(parent, proc, EventType.CLONE, t))
        events.extend(_session(template, proc, t, files, flows, rng))
        procs.append(proc)

    events.sort(key=lambda e: e.timestamp)
    logger.info("Generated %d benign events for %d processes", len(events), config.processes)
    return events


# ---- attacks ----------------------------------------------------------------


def benign_pair_types(events: Iterable[Event]) -> dict[tuple[EntityType, EntityType], set[EventType]]:
    """Event types observed per (source type, destination type)."""
    seen: dict[tuple[EntityType, EntityType], set[EventType]] = {}
    for ev in events:
        seen.setdefault((ev.src_type, ev.dst_type), set()).add(ev.event_type)
    return seen


def unseen_event_type(
    pair_types: dict[tuple[EntityType, EntityType], set[EventType]],
    src_type: EntityType,
    dst_type: EntityType,
    rng: np.random.Generator,
) -> EventType | None:
    """An event type never observed between these entity types, or None if all were."""
    seen = pair_types.get((src_type, dst_type), set())
    candidates = [t for t in EVENT_TYPES if t not in seen]
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


def _split_counts(nodes: int, proc_share: float, flow_share: float) -> tuple[int, int, int]:
    procs = max(1, int(nodes * proc_share))
    rest = nodes - procs
    flows = min(rest, max(1, int(nodes * flow_share))) if rest else 0
    return procs, rest - flows, flows


SCENARIO_SHARES = {
    "exfiltration-chain": (0.2, 0.3),
    "dropper": (0.3, 0.2),
    "backdoor-netflow": (0.2, 0.6),
}


def _attack_entities(
    scenario: AttackConfig,
    prefix: str,
    benign: Sequence[Event],
    rng: np.random.Generator,
) -> tuple[list[_Entity], list[_Entity], list[_Entity]]:
    n_p, n_f, n_n = _split_counts(scenario.nodes, *SCENARIO_SHARES[scenario.scenario])
    if scenario.novel_tokens:
        p_attrs = [NOVEL_PROCESS_ATTRS[i % len(NOVEL_PROCESS_ATTRS)] for i in range(n_p)]
        f_attrs = [NOVEL_FILE_ATTRS[i % len(NOVEL_FILE_ATTRS)].format(i) for i in range(n_f)]
        n_attrs = [NOVEL_NETFLOW_ATTRS[i % len(NOVEL_NETFLOW_ATTRS)] for i in range(n_n)]
    else:
        by_type: dict[EntityType, list[str]] = {P: [], F: [], N: []}
        for ev in benign:
            by_type[ev.src_type].append(ev.src_attr)
            by_type[ev.dst_type].append(ev.dst_attr)

        def borrow(kind: EntityType, count: int) -> list[str]:
            pool = sorted(set(by_type[kind])) or [ROOT_COMMAND]
            return [pool[int(rng.integers(len(pool)))] for _ in range(count)]

        p_attrs, f_attrs, n_attrs = borrow(P, n_p), borrow(F, n_f), borrow(N, n_n)

    procs = [_Entity(f"{prefix}-proc-{i}", P, a) for i, a in enumerate(p_attrs)]
    files = [_Entity(f"{prefix}-file-{i}", F, a) for i, a in enumerate(f_attrs)]
    flows = [_Entity(f"{prefix}-net-{i}", N, a) for i, a in enumerate(n_attrs)]
    return procs, files, flows


def _attack_steps(
    scenario: str, procs: list[_Entity], files: list[_Entity], flows: list[_Entity]
) -> list[tuple[_Entity, _Entity, EventType]]:
    """(actor, object, event) in order; the root CLONE is added by the caller."""
    E = EventType
    steps = [(procs[i], procs[i + 1], E.CLONE) for i in range(len(procs) - 1)]
    actor = procs[-1]
    if scenario == "exfiltration-chain":
        # repeated file access followed by a network send
        rounds = max(3, len(flows))
        for r in range(rounds):
            for f in files[r::rounds]:
                steps += [(actor, f, E.OPEN), (actor, f, E.READ)]
            if flows:
                flow = flows[r % len(flows)]
                if r < len(flows):
                    steps.append((actor, flow, E.CONNECT))
                steps.append((actor, flow, E.SENDTO))
    elif scenario == "dropper":
        loader = procs[0]
        if flows:
            steps += [(loader, flows[0], E.CONNECT), (loader, flows[0], E.RECVFROM)]
        for f in files:
            steps.append((loader, f, E.WRITE))
        for j, p in enumerate(procs):
            if files:
                steps.append((p, files[j % len(files)], E.EXECUTE))
        for flow in flows[1:]:
            steps += [(actor, flow, E.CONNECT), (actor, flow, E.SENDTO)]
    elif scenario == "backdoor-netflow":
        listener = procs[0]
        for flow in flows:
            steps.append((listener, flow, E.RECVFROM))
        for j, f in enumerate(files):
            worker = procs[j % len(procs)]
            steps += [(worker, f, E.OPEN), (worker, f, E.READ)]
        for j, flow in enumerate(flows):
            steps.append((procs[j % len(procs)], flow, E.SENDTO))
    return steps


def inject_attack(
    events: Sequence[Event],
    scenario: AttackConfig,
    seed: int,
    campaign_id: str = "campaign-1",
) -> tuple[list[Event], CampaignLabels]:
    """
    Append one attack campaign rooted at a benign process (via a plain CLONE)
    and return the merged, time-sorted log with the campaign's node labels.
    """
    if scenario.scenario not in SCENARIOS:
        raise UnknownScenario(f"unknown attack scenario {scenario.scenario!r}; expected one of {SCENARIOS}")
    if not events:
        raise EmptyCorpus("cannot inject an attack into an empty log")
    rng = np.random.default_rng(seed)
    start = DAY_START_NS + int(scenario.at * DAY_NS)

    known_ids = {e.src_id for e in events} | {e.dst_id for e in events}
    prefix = f"atk-{campaign_id}"
    if any(i.startswith(prefix + "-") for i in known_ids):
        raise ValueError(f"node ids with prefix {prefix!r} already exist in the log")

    # benign processes already alive at the start of the attack
    roots = sorted({e.src_id: e for e in events if e.src_type == P and e.timestamp <= start}.items())
    if not roots:
        roots = sorted({e.src_id: e for e in events if e.src_type == P}.items())
    if not roots:
        raise EmptyCorpus("no benign process to root the attack at")
    _, root_ev = roots[int(rng.integers(len(roots)))]
    root = _Entity(root_ev.src_id, P, root_ev.src_attr)

    procs, files, flows = _attack_entities(scenario, prefix, events, rng)
    pair_types = benign_pair_types(events)

    attack: list[Event] = []
    clock = start

    def add(src: _Entity, dst: _Entity, ev: EventType) -> None:
        nonlocal clock
        clock += 2 * SECOND_NS
        attack.append(_event(src, dst, ev, clock))

    add(root, procs[0], EventType.CLONE)
    for actor, obj, ev in _attack_steps(scenario.scenario, procs, files, flows):
        src, dst = (obj, actor) if scenario.rare_motif and ev is not EventType.CLONE else (actor, obj)
        add(src, dst, ev)

    if scenario.rare_event:
        pairs = []
        for ev in attack[1:]:
            if ev.event_type is not EventType.CLONE and (ev.src_id, ev.dst_id) not in pairs:
                pairs.append((ev.src_id, ev.dst_id))
        by_id = {e.id: e for e in procs + files + flows}
        for s, d in pairs:
            src, dst = by_id[s], by_id[d]
            extra = unseen_event_type(pair_types, src.type, dst.type, rng)
            if extra is not None:
                add(src, dst, extra)

    labels = CampaignLabels({campaign_id: frozenset(e.id for e in procs + files + flows)})
    merged = sorted([*events, *attack], key=lambda e: e.timestamp)
    logger.info(
        "Injected %s campaign %s: %d nodes, %d events at t=%.2f",
        scenario.scenario,
        campaign_id,
        scenario.nodes,
        len(attack),
        scenario.at,
    )
    return merged, labels


# ---- corpus -----------------------------------------------------------------


def split_by_time(
    events: Sequence[Event], train_fraction: float, validation_fraction: float
) -> tuple[list[Event], list[Event], list[Event]]:
    """Train / validation / test windows over the simulated day."""
    t_val = DAY_START_NS + int(train_fraction * DAY_NS)
    t_test = DAY_START_NS + int((train_fraction + validation_fraction) * DAY_NS)
    train = [e for e in events if e.timestamp < t_val]
    val = [e for e in events if t_val <= e.timestamp < t_test]
    test = [e for e in events if e.timestamp >= t_test]
    return train, val, test


@dataclass
class SynthCorpus:
    train: list[Event]
    validation: list[Event]
    test: list[Event]
    labels: CampaignLabels


def generate_corpus(config: SynthConfig, seed: int) -> SynthCorpus:
    """Benign day plus every configured attack, split by time. Attacks land in the test window."""
    events = generate_benign(config, seed)
    campaigns: dict[str, frozenset[str]] = {}
    for i, attack in enumerate(config.attacks, start=1):
        events, labels = inject_attack(events, attack, seed + i, campaign_id=f"campaign-{i}")
        campaigns.update(labels.campaigns)
    train, val, test = split_by_time(events, config.train_fraction, config.validation_fraction)
    return SynthCorpus(train, val, test, CampaignLabels(campaigns))


def write_corpus(corpus: SynthCorpus, paths: PathsConfig) -> dict[str, int]:
    counts = {
        "train": write_events(paths.train_log, corpus.train),
        "validation": write_events(paths.validation_log, corpus.validation),
        "test": write_events(paths.test_log, corpus.test),
    }
    write_labels(paths.labels, corpus.labels)
    logger.info("Wrote corpus: %s events, %d campaigns", counts, len(corpus.labels))
    return counts
