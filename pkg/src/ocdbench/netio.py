"""Discrete Bayesian-network files.

Reads and writes the BIF dialect used by the four bundled benchmark
networks (asia, child, insurance, alarm) and the plain-text variable
description files that accompany them.  Networks are bundled as package
data for offline use; :func:`fetch_network` can refresh them from a
repository URL when network access is available.

Conditional probability tables are stored with one row per joint parent
configuration, ordered with the *last* parent varying fastest, matching
the row order of ``table`` blocks in the source files.
"""

from __future__ import annotations

import math
import re
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-9
BUNDLED = ("asia", "child", "insurance", "alarm")

_PUNCT = set("{}()[],;|")


class NetFormatError(ValueError):
    """Malformed network or description file."""


@dataclass
class NodeSpec:
    name: str
    states: list[str]
    parents: list[int]
    cpt: np.ndarray  # (n_parent_configs, n_states)

    @property
    def n_states(self) -> int:
        return len(self.states)


@dataclass
class BayesNet:
    name: str
    nodes: list[NodeSpec]
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {spec.name: i for i, spec in enumerate(self.nodes)}

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def node_names(self) -> list[str]:
        return [spec.name for spec in self.nodes]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, i) for i, spec in enumerate(self.nodes) for p in spec.parents]

    @property
    def state_counts(self) -> np.ndarray:
        return np.array([spec.n_states for spec in self.nodes], dtype=np.int64)

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown node name {name!r}") from None

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for parent, child in self.edges:
            adj[parent, child] = True
        return adj

    def topological_order(self) -> list[int]:
        order = _topological_order([spec.parents for spec in self.nodes])
        if order is None:
            raise NetFormatError(f"network {self.name!r} contains a cycle")
        return order

    def parent_row_index(self, node: int, parent_values: np.ndarray) -> np.ndarray:
        """CPT row indices for joint parent assignments (last parent fastest).

        ``parent_values`` has one column per parent of ``node`` in declared
        parent order; a (N,) array of row indices is returned.
        """
        spec = self.nodes[node]
        if not spec.parents:
            return np.zeros(len(parent_values), dtype=np.int64)
        idx = np.zeros(len(parent_values), dtype=np.int64)
        for col, parent in enumerate(spec.parents):
            idx = idx * self.nodes[parent].n_states + parent_values[:, col]
        return idx


def _topological_order(parents: list[list[int]]) -> list[int] | None:
    n = len(parents)
    indeg = [len(ps) for ps in parents]
    children: list[list[int]] = [[] for _ in range(n)]
    for child, ps in enumerate(parents):
        for p in ps:
            children[p].append(child)
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    order: list[int] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for c in children[node]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return order if len(order) == n else None


# --- BIF parsing -----------------------------------------------------------

@dataclass
class _Token:
    text: str
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == "/" and text[i : i + 2] == "//":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _PUNCT:
            tokens.append(_Token(ch, line))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in _PUNCT:
                j += 1
            tokens.append(_Token(text[i:j], line))
            i = j
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> _Token | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def next(self, expect: str | None = None) -> _Token:
        tok = self.peek()
        if tok is None:
            raise NetFormatError("unexpected end of file")
        self._pos += 1
        if expect is not None and tok.text != expect:
            raise NetFormatError(f"line {tok.line}: expected {expect!r}, found {tok.text!r}")
        return tok

    def at_end(self) -> bool:
        return self._pos >= len(self._tokens)


def _parse_float(tok: _Token) -> float:
    try:
        return float(tok.text)
    except ValueError:
        raise NetFormatError(f"line {tok.line}: expected a number, found {tok.text!r}") from None


def parse_bif(text: str, name: str = "network") -> BayesNet:
    """Parse BIF text into a validated :class:`BayesNet`.

    Validation covers duplicate or undeclared variables, CPT shape, row sums
    (within ``ROW_SUM_TOL``, then renormalised exactly) and acyclicity.
    """
    stream = _TokenStream(_tokenize(text))
    net_name = name
    states: dict[str, list[str]] = {}
    order: list[str] = []
    tables: dict[str, tuple[list[str], np.ndarray, int]] = {}  # node -> (parents, cpt, line)

    while not stream.at_end():
        tok = stream.next()
        if tok.text == "network":
            parts = []
            while stream.peek() is not None and stream.peek().text != "{":
                parts.append(stream.next().text)
            if parts:
                net_name = " ".join(parts)
            _skip_block(stream)
        elif tok.text == "variable":
            _parse_variable(stream, states, order)
        elif tok.text == "probability":
            _parse_probability(stream, states, tables)
        else:
            raise NetFormatError(f"line {tok.line}: unexpected token {tok.text!r}")

    if not order:
        raise NetFormatError("network declares no variables")
    nodes: list[NodeSpec] = []
    name_index = {n: i for i, n in enumerate(order)}
    for node_name in order:
        if node_name not in tables:
            raise NetFormatError(f"no probability block for variable {node_name!r}")
        parent_names, cpt, line = tables[node_name]
        parent_idx = []
        for p in parent_names:
            if p not in name_index:
                raise NetFormatError(f"line {line}: undeclared parent {p!r} of {node_name!r}")
            parent_idx.append(name_index[p])
        expected_rows = math.prod(len(states[p]) for p in parent_names) if parent_names else 1
        n_states = len(states[node_name])
        if cpt.shape != (expected_rows, n_states):
            raise NetFormatError(
                f"line {line}: table for {node_name!r} has shape {cpt.shape}, "
                f"expected {(expected_rows, n_states)}"
            )
        sums = cpt.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise NetFormatError(
                f"line {line}: row {bad[0]} of {node_name!r} sums to {sums[bad[0]]!r}"
            )
        cpt = cpt / sums[:, None]  # exact simplexes for downstream sampling
        nodes.append(NodeSpec(node_name, list(states[node_name]), parent_idx, cpt))

    net = BayesNet(net_name, nodes)
    net.topological_order()  # raises on cycles
    return net


def _skip_block(stream: _TokenStream) -> None:
    stream.next("{")
    depth = 1
    while depth:
        tok = stream.next()
        if tok.text == "{":
            depth += 1
        elif tok.text == "}":
            depth -= 1


def _parse_variable(stream: _TokenStream, states: dict[str, list[str]], order: list[str]) -> None:
    name_tok = stream.next()
    name = name_tok.text
    if name in states:
        raise NetFormatError(f"line {name_tok.line}: duplicate variable {name!r}")
    stream.next("{")
    var_states: list[str] | None = None
    while True:
        tok = stream.next()
        if tok.text == "}":
            break
        if tok.text == "type":
            stream.next("discrete")
            stream.next("[")
            count_tok = stream.next()
            stream.next("]")
            stream.next("{")
            labels = []
            while True:
                t = stream.next()
                if t.text == "}":
                    break
                if t.text != ",":
                    labels.append(t.text)
            stream.next(";")
            declared = int(count_tok.text)
            if declared != len(labels):
                raise NetFormatError(
                    f"line {count_tok.line}: variable {name!r} declares {declared} states "
                    f"but lists {len(labels)}"
                )
            var_states = labels
        elif tok.text == "property":
            while stream.next().text != ";":
                pass
        else:
            raise NetFormatError(f"line {tok.line}: unexpected token {tok.text!r} in variable block")
    if var_states is None:
        raise NetFormatError(f"line {name_tok.line}: variable {name!r} has no type declaration")
    if len(var_states) < 2:
        raise NetFormatError(f"line {name_tok.line}: variable {name!r} needs at least two states")
    states[name] = var_states
    order.append(name)


def _parse_probability(
    stream: _TokenStream,
    states: dict[str, list[str]],
    tables: dict[str, tuple[list[str], np.ndarray, int]],
) -> None:
    open_tok = stream.next("(")
    child_tok = stream.next()
    child = child_tok.text
    if child not in states:
        raise NetFormatError(f"line {child_tok.line}: probability block for undeclared {child!r}")
    if child in tables:
        raise NetFormatError(f"line {child_tok.line}: duplicate probability block for {child!r}")
    parent_names: list[str] = []
    tok = stream.next()
    if tok.text == "|":
        while True:
            p = stream.next()
            if p.text == ")":
                break
            if p.text != ",":
                parent_names.append(p.text)
    elif tok.text != ")":
        raise NetFormatError(f"line {tok.line}: expected ')' or '|', found {tok.text!r}")
    for p in parent_names:
        if p not in states:
            raise NetFormatError(f"line {open_tok.line}: undeclared parent {p!r} of {child!r}")

    n_states = len(states[child])
    n_rows = math.prod(len(states[p]) for p in parent_names) if parent_names else 1
    cpt = np.full((n_rows, n_states), np.nan)
    parent_state_counts = [len(states[p]) for p in parent_names]

    stream.next("{")
    while True:
        tok = stream.next()
        if tok.text == "}":
            break
        if tok.text == "table":
            values = _read_numbers(stream)
            if len(values) != n_rows * n_states:
                raise NetFormatError(
                    f"line {tok.line}: table for {child!r} lists {len(values)} values, "
                    f"expected {n_rows * n_states}"
                )
            cpt[:] = np.array(values).reshape(n_rows, n_states)
        elif tok.text == "(":
            labels = []
            while True:
                t = stream.next()
                if t.text == ")":
                    break
                if t.text != ",":
                    labels.append(t.text)
            if len(labels) != len(parent_names):
                raise NetFormatError(
                    f"line {tok.line}: row for {child!r} names {len(labels)} parent states, "
                    f"expected {len(parent_names)}"
                )
            row = 0
            for label, pname, count in zip(labels, parent_names, parent_state_counts):
                try:
                    value = states[pname].index(label)
                except ValueError:
                    raise NetFormatError(
                        f"line {tok.line}: unknown state {label!r} of parent {pname!r}"
                    ) from None
                row = row * count + value
            values = _read_numbers(stream)
            if len(values) != n_states:
                raise NetFormatError(
                    f"line {tok.line}: row for {child!r} lists {len(values)} values, "
                    f"expected {n_states}"
                )
            cpt[row] = values
        else:
            raise NetFormatError(f"line {tok.line}: unexpected token {tok.text!r} in probability block")

    if np.isnan(cpt).any():
        raise NetFormatError(f"line {open_tok.line}: incomplete table for {child!r}")
    tables[child] = (parent_names, cpt, open_tok.line)


def _read_numbers(stream: _TokenStream) -> list[float]:
    values: list[float] = []
    while True:
        tok = stream.next()
        if tok.text == ";":
            return values
        if tok.text != ",":
            values.append(_parse_float(tok))


# --- BIF serialisation -----------------------------------------------------

def serialize_bif(net: BayesNet) -> str:
    """Emit the network in the same dialect :func:`parse_bif` accepts."""
    out = [f"network {net.name} {{", "}"]
    for spec in net.nodes:
        out.append(f"variable {spec.name} {{")
        out.append(f"  type discrete [ {spec.n_states} ] {{ {', '.join(spec.states)} }};")
        out.append("}")
    for spec in net.nodes:
        if not spec.parents:
            out.append(f"probability ( {spec.name} ) {{")
            out.append(f"  table {_fmt_row(spec.cpt[0])};")
            out.append("}")
            continue
        parent_names = [net.nodes[p].name for p in spec.parents]
        out.append(f"probability ( {spec.name} | {', '.join(parent_names)} ) {{")
        parent_states = [net.nodes[p].states for p in spec.parents]
        for row, combo in enumerate(_configs(parent_states)):
            out.append(f"  ( {', '.join(combo)} ) {_fmt_row(spec.cpt[row])};")
        out.append("}")
    return "\n".join(out) + "\n"


def _fmt_row(row: np.ndarray) -> str:
    return ", ".join(format(v, ".17g") for v in row)


def _configs(parent_states: list[list[str]]):
    """Joint parent-state combinations, last parent varying fastest."""
    if not parent_states:
        yield ()
        return
    for head in parent_states[0]:
        for rest in _configs(parent_states[1:]):
            yield (head, *rest)


# --- loading ---------------------------------------------------------------

def _data_text(filename: str) -> str:
    return resources.files("ocdbench.data").joinpath(filename).read_text(encoding="utf-8")


def load_network(name_or_path: str | Path) -> BayesNet:
    """Load a bundled network by name or any BIF file by path."""
    name = str(name_or_path)
    if name in BUNDLED:
        return parse_bif(_data_text(f"{name}.bif"), name=name)
    path = Path(name_or_path)
    if not path.exists():
        raise FileNotFoundError(
            f"{name!r} is neither a bundled network ({', '.join(BUNDLED)}) nor an existing file"
        )
    return parse_bif(path.read_text(encoding="utf-8"), name=path.stem)


def network_summary(net: BayesNet) -> dict:
    """Node/edge counts, state-cardinality range and max in-degree."""
    counts = net.state_counts
    indegrees = [len(spec.parents) for spec in net.nodes]
    return {
        "name": net.name,
        "nodes": net.n,
        "edges": len(net.edges),
        "min_states": int(counts.min()),
        "max_states": int(counts.max()),
        "max_in_degree": max(indegrees),
    }


# --- variable descriptions -------------------------------------------------

@dataclass
class VariableDescriptions:
    """Ordered node descriptions plus the domain phrase used in prompts."""

    name: str
    domain_blurb: str
    entries: dict[str, str]  # insertion order is the canonical prompt order

    @property
    def node_names(self) -> list[str]:
        return list(self.entries)


def parse_descriptions(text: str, name: str = "descriptions") -> VariableDescriptions:
    domain: str | None = None
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if ":" not in line:
            raise NetFormatError(f"line {lineno}: expected 'name: description'")
        key, rest = line.split(":", 1)
        key = key.strip()
        desc = rest[1:] if rest.startswith(" ") else rest
        if key == "domain":
            if domain is not None:
                raise NetFormatError(f"line {lineno}: duplicate domain header")
            domain = desc
        else:
            if key in entries:
                raise NetFormatError(f"line {lineno}: duplicate description for {key!r}")
            entries[key] = desc
    if domain is None:
        raise NetFormatError("missing 'domain:' header")
    if not entries:
        raise NetFormatError("no variable descriptions found")
    return VariableDescriptions(name, domain, entries)


def load_descriptions(
    name_or_path: str | Path,
    net: BayesNet | None = None,
) -> VariableDescriptions:
    """Load bundled descriptions by dataset name or any description file by path.

    When ``net`` is given, the entries must cover exactly its node set.
    """
    name = str(name_or_path)
    if name in BUNDLED:
        descs = parse_descriptions(_data_text(f"{name}.desc"), name=name)
    else:
        path = Path(name_or_path)
        if not path.exists():
            raise FileNotFoundError(
                f"{name!r} is neither a bundled description set nor an existing file"
            )
        descs = parse_descriptions(path.read_text(encoding="utf-8"), name=path.stem)
    if net is not None:
        have = set(descs.entries)
        want = set(net.node_names)
        missing = sorted(want - have)
        unknown = sorted(have - want)
        if missing:
            raise NetFormatError(f"description missing for node(s): {', '.join(missing)}")
        if unknown:
            raise NetFormatError(f"description for unknown node(s): {', '.join(unknown)}")
    return descs


# --- optional refresh from a repository ------------------------------------

DEFAULT_FETCH_URL = "https://www.bnlearn.com/bnrepository/{name}/{name}.bif"


def fetch_network(name: str, dest_dir: str | Path, url_template: str = DEFAULT_FETCH_URL) -> Path:
    """Download a network file and validate it before writing to ``dest_dir``.

    Offline environments keep using the bundled fixtures; this is a
    convenience for refreshing them when the repository is reachable.
    """
    url = url_template.format(name=name)
    with urllib.request.urlopen(url) as resp:  # noqa: S310 - explicit opt-in fetch
        text = resp.read().decode("utf-8")
    parse_bif(text, name=name)
    dest = Path(dest_dir) / f"{name}.bif"
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text, encoding="utf-8")
    return dest
