"""Bracket-notation PD schemes: parsing, enumeration, sensitivity, assembly.

A scheme ``[N;L_1,...,L_{m-k}:M_1,...,M_k]`` says how many settings each
device contributes to a corner. The state device and the qudits left of
the colon index rows, the qudits right of the colon index columns. Entries
are powers of ``d``; a leading ``2`` marks the one row device and the one
column device whose settings are doubled to displace the four corners of
a square. An optional cycle prefix such as ``(123)`` relabels qudits:
the device in bracket position ``p`` is qudit ``pi(p)``.
"""
import itertools
import math
import re
from dataclasses import dataclass, field

from .errors import BadClass, InconsistentCornerSize, InsufficientSettings, ParseError
from .pd import Square
from .tensor import AxisSelection, SplitDescriptor, flatten

LEFT, RIGHT = "L", "R"

DOUBLED_LEFT_POSITIONS = 2

_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹", "0123456789")


@dataclass(frozen=True, order=True)
class Slot:
    exponent: int
    doubled: bool = False

    def count(self, d):
        return d ** self.exponent

    def size(self, d):
        return self.count(d) * (2 if self.doubled else 1)

    @property
    def text(self):
        base = {0: "", 1: "d"}.get(self.exponent, f"d^{self.exponent}")
        if self.doubled:
            return "2" + base
        return base or "1"

    def with_doubled(self, doubled=True):
        return Slot(self.exponent, doubled)


# ---------------------------------------------------------------------------
# permutations in cycle notation (qudits are 1-based)


def perm_to_cycles(perm):
    """Disjoint-cycle text for ``perm`` given as ``perm[p-1] = image of p``."""
    seen, out = set(), []
    for start in range(1, len(perm) + 1):
        if start in seen or perm[start - 1] == start:
            continue
        cycle, p = [], start
        while p not in seen:
            seen.add(p)
            cycle.append(p)
            p = perm[p - 1]
        out.append("(" + "".join(map(str, cycle)) + ")")
    return "".join(out)


def cycles_to_perm(cycles, m):
    """Compose cycles (rightmost applied first) into image-list form."""
    perm = list(range(1, m + 1))
    for cycle in reversed(cycles):
        step = {cycle[i]: cycle[(i + 1) % len(cycle)] for i in range(len(cycle))}
        perm = [step.get(x, x) for x in perm]
    return tuple(perm)


def moved_points(perm):
    return sum(1 for p, q in enumerate(perm, start=1) if p != q)


def compose(outer, inner):
    """``(outer o inner)(p) = outer(inner(p))``."""
    return tuple(outer[inner[p] - 1] for p in range(len(inner)))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BracketScheme:
    m: int
    d: int
    state: Slot
    left: tuple
    right: tuple
    perm: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        if self.perm is None:
            object.__setattr__(self, "perm", tuple(range(1, self.m + 1)))
        object.__setattr__(self, "perm", tuple(self.perm))
        if len(self.left) + len(self.right) != self.m:
            raise InconsistentCornerSize(
                f"{len(self.left) + len(self.right)} qudit entries for m={self.m}")
        if not self.right:
            raise InconsistentCornerSize("at least one qudit must be right of the colon")
        if sorted(self.perm) != list(range(1, self.m + 1)):
            raise ValueError(f"{self.perm} is not a permutation of 1..{self.m}")
        row_exp = self.state.exponent + sum(s.exponent for s in self.left)
        col_exp = sum(s.exponent for s in self.right)
        if row_exp != 2 * self.k or col_exp != 2 * self.k:
            raise InconsistentCornerSize(
                f"corner is d^{row_exp} x d^{col_exp}, expected d^{2 * self.k} x d^{2 * self.k}")
        n_row = int(self.state.doubled) + sum(s.doubled for s in self.left)
        n_col = sum(s.doubled for s in self.right)
        if (n_row, n_col) not in ((0, 0), (1, 1)):
            raise InconsistentCornerSize(
                "a square doubles exactly one row device and one column device "
                f"(got {n_row} row, {n_col} column)")

    @property
    def k(self):
        return len(self.right)

    @property
    def is_square(self):
        return self.state.doubled or any(s.doubled for s in self.left)

    @property
    def rank(self):
        """Corner size ``d^(2k)``: the rank bound of uncorrelated data."""
        return self.d ** (2 * self.k)

    @property
    def bracket(self):
        state = self.state.text
        left = ",".join(s.text for s in self.left)
        right = ",".join(s.text for s in self.right)
        return f"[{state};{left}:{right}]" if self.left else f"[{state}:{right}]"

    @property
    def text(self):
        return perm_to_cycles(self.perm) + self.bracket

    def __str__(self):
        return self.text

    def slots(self):
        """``(side, Slot)`` for each bracket position, in order."""
        return [(LEFT, s) for s in self.left] + [(RIGHT, s) for s in self.right]

    def qudit_roles(self):
        """Map qudit (1-based) -> ``(side, Slot)``."""
        return {self.perm[p]: role for p, role in enumerate(self.slots())}

    def left_qudits(self):
        roles = self.qudit_roles()
        return [q for q in range(1, self.m + 1) if roles[q][0] == LEFT]

    def right_qudits(self):
        roles = self.qudit_roles()
        return [q for q in range(1, self.m + 1) if roles[q][0] == RIGHT]

    def corner(self):
        return BracketScheme(self.m, self.d, self.state.with_doubled(False),
                             [s.with_doubled(False) for s in self.left],
                             [s.with_doubled(False) for s in self.right], self.perm)

    def permuted(self, pi):
        """Apply a qudit relabelling ``pi`` on top of this scheme's own."""
        return BracketScheme(self.m, self.d, self.state, self.left, self.right, compose(tuple(pi), self.perm))

    def axis_slots(self):
        """Map tensor axis (0 = state, q = qudit q) -> Slot."""
        out = {0: self.state}
        for q, (_, slot) in self.qudit_roles().items():
            out[q] = slot
        return out

    def required_shape(self):
        slots = self.axis_slots()
        return tuple(slots[ax].size(self.d) for ax in range(self.m + 1))

    def key(self):
        """Role assignment up to the equivalences used for counting PDs.

        Qudits with identical roles are interchangeable, and a scheme whose
        doubled left qudit and doubled right qudit both carry ``2d^2`` is
        identified with the scheme that swaps them.
        """
        roles = self.qudit_roles()
        base = tuple((side, slot.exponent, slot.doubled) for side, slot in
                     (roles[q] for q in range(1, self.m + 1)))
        keys = [base]
        swap = _transpose_pair(base)
        if swap:
            p, q = swap
            alt = list(base)
            alt[p], alt[q] = alt[q], alt[p]
            keys.append(tuple(alt))
        return (self.state.exponent, self.state.doubled, min(keys))


def _transpose_pair(roles):
    lefts = [i for i, r in enumerate(roles) if r == (LEFT, 2, True)]
    rights = [i for i, r in enumerate(roles) if r == (RIGHT, 2, True)]
    if len(lefts) == 1 and len(rights) == 1:
        return lefts[0], rights[0]
    return None


# ---------------------------------------------------------------------------
# parsing

_ENTRY = re.compile(r"\s*(?:(?P<two>2)?d(?:\^(?P<exp>\d+))?|(?P<one>1)|(?P<bare2>2))\s*")
_CYCLE = re.compile(r"\s*\((?P<body>\d+)\)")


def _parse_entries(text, pos, stop_chars, single=False):
    entries = []
    while True:
        match = _ENTRY.match(text, pos)
        if not match or match.end() == pos:
            raise ParseError("expected an entry (1, 2, d, 2d, d^n or 2d^n)", text, pos)
        if match.group("one"):
            slot = Slot(0, False)
        elif match.group("bare2"):
            slot = Slot(0, True)
        else:
            exp = int(match.group("exp")) if match.group("exp") else 1
            if exp == 0:
                raise ParseError("write d^0 as 1", text, match.start())
            slot = Slot(exp, bool(match.group("two")))
        entries.append(slot)
        pos = match.end()
        if pos >= len(text):
            raise ParseError("unterminated bracket", text, pos)
        if text[pos] == "," and single:
            raise ParseError("the state entry must be a single number", text, pos)
        if text[pos] == ",":
            pos += 1
            continue
        if text[pos] in stop_chars:
            return entries, pos
        raise ParseError(f"unexpected character {text[pos]!r}", text, pos)


def parse(text, m, d=2):
    """Parse ``"(cycles)[N;L...:M...]"`` into a :class:`BracketScheme`."""
    # superscript exponents are rewritten as "^n"; error positions refer to the rewritten text
    text = re.sub("[⁰¹²³⁴⁵⁶⁷⁸⁹]+", lambda mt: "^" + mt.group().translate(_SUPERSCRIPTS), text)
    pos = 0
    cycles = []
    stripped = text.lstrip()
    if stripped.startswith(("π", "pi")):
        if m != 2:
            raise ParseError("bare 'pi' prefix is only meaningful for m=2; use cycle notation", text, 0)
        cycles.append((1, 2))
        pos = text.index("[") if "[" in text else len(text)
    while True:
        match = _CYCLE.match(text, pos)
        if not match:
            break
        body = [int(ch) for ch in match.group("body")]
        if len(set(body)) != len(body) or any(not 1 <= q <= m for q in body):
            raise ParseError(f"cycle ({match.group('body')}) is not a cycle on 1..{m}", text, match.start())
        cycles.append(tuple(body))
        pos = match.end()
    while pos < len(text) and text[pos].isspace():
        pos += 1
    if pos >= len(text) or text[pos] != "[":
        raise ParseError("expected '['", text, pos)
    state_entries, pos = _parse_entries(text, pos + 1, ";:", single=True)
    left = []
    if text[pos] == ";":
        left, pos = _parse_entries(text, pos + 1, ":")
    right, pos = _parse_entries(text, pos + 1, "]")
    if text[pos + 1:].strip():
        raise ParseError("trailing characters after ']'", text, pos + 1)
    perm = cycles_to_perm(cycles, m)
    return BracketScheme(m, d, state_entries[0], left, right, perm)


# ---------------------------------------------------------------------------
# enumeration


def _left_sort_key(slot):
    return (-slot.exponent, not slot.doubled)


def canonical_template(state, left, right, m, d):
    left = sorted(left, key=_left_sort_key)
    right = sorted(right, key=lambda s: not s.doubled)
    return BracketScheme(m, d, state, left, right)


def corner_templates(m, d, k):
    """Distinct corners of class ``k``: row entries multiply to ``d^(2k)``."""
    if not 1 <= k <= m:
        raise BadClass(f"class k must satisfy 1 <= k <= m={m}, got {k}")
    n_left = m - k
    corners = []
    for e0 in range(2 * k, -1, -1):
        rest = 2 * k - e0
        combos = [c for c in itertools.combinations_with_replacement((2, 1, 0), n_left) if sum(c) == rest]
        for combo in sorted(combos, reverse=True):
            corners.append(BracketScheme(m, d, Slot(e0), [Slot(e) for e in combo], [Slot(2)] * k))
    return corners


def square_table(corner):
    """One row of a corner/square table.

    Column 0 doubles the state device, column ``j`` doubles left entry ``j``.
    Only the first :data:`DOUBLED_LEFT_POSITIONS` left entries are doubled:
    a doubled ``1`` on an otherwise idle qudit adds nothing new at ``k=1``.
    Entries equivalent (by qudit permutation) to one further left in the row
    are ``None``.
    """
    m, d = corner.m, corner.d
    row, seen = [], set()
    right = [Slot(2, True)] + [Slot(2)] * (corner.k - 1)
    for j in range(min(len(corner.left), DOUBLED_LEFT_POSITIONS) + 1):
        if j == 0:
            sq = canonical_template(corner.state.with_doubled(), corner.left, right, m, d)
        else:
            left = list(corner.left)
            left[j - 1] = left[j - 1].with_doubled()
            sq = canonical_template(corner.state, left, right, m, d)
        if sq.bracket in seen:
            row.append(None)
        else:
            seen.add(sq.bracket)
            row.append(sq)
    return row


def _perm_order(m):
    perms = list(itertools.permutations(range(1, m + 1)))
    return sorted(perms, key=lambda p: (moved_points(p), perm_to_cycles(p)))


def permutation_variants(template):
    """Distinct relabellings of a template, one representative per class."""
    seen, out = set(), []
    for perm in _perm_order(template.m):
        scheme = BracketScheme(template.m, template.d, template.state, template.left, template.right, perm)
        key = scheme.key()
        if key not in seen:
            seen.add(key)
            out.append(scheme)
    return out


def symmetry_notes(template):
    """Transpositions of non-traced qudits that leave the template's key unchanged."""
    notes = []
    base = template.key()
    roles = template.qudit_roles()
    traced = {q for q, (side, slot) in roles.items() if side == LEFT and slot == Slot(0)}
    for p, q in itertools.combinations(range(1, template.m + 1), 2):
        if p in traced and q in traced:
            continue
        swap = list(range(1, template.m + 1))
        swap[p - 1], swap[q - 1] = q, p
        if template.permuted(swap).key() == base:
            notes.append(f"({p}{q})")
    return notes


@dataclass
class EnumerationReport:
    m: int
    d: int
    k: int
    corners: list
    table: list            # rows of square templates (None = blank cell)
    squares: list          # distinct square templates
    variants: list         # every distinct PD scheme
    counts: dict           # template bracket -> number of variants
    symmetries: dict = field(default_factory=dict)

    @property
    def total(self):
        return len(self.variants)


def enumerate_schemes(m, d=2, k=1):
    """All distinct PD schemes of class ``k`` for ``m`` qudits."""
    if not isinstance(m, int) or m < 1:
        raise BadClass(f"m must be a positive integer, got {m}")
    corners = corner_templates(m, d, k)
    table = [square_table(c) for c in corners]
    squares = [sq for row in table for sq in row if sq is not None]
    variants, counts, symmetries = [], {}, {}
    for sq in squares:
        vs = permutation_variants(sq)
        variants.extend(vs)
        counts[sq.bracket] = len(vs)
        notes = symmetry_notes(sq)
        if notes:
            symmetries[sq.bracket] = notes
    return EnumerationReport(m, d, k, corners, table, squares, variants, counts, symmetries)


def most_scalable_count(m):
    """Closed-form number of class-1 PDs for ``m`` qudits."""
    return m * (7 * m * m - 12 * m + 7) // 2


def reduced_scheme_count(r):
    """Distinct r x r PDs of an (r+1)x(r+1) protocol: ``C(r+1, 2)^2``."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return math.comb(r + 1, 2) ** 2


# ---------------------------------------------------------------------------
# sensitivity


def correlation_labels(m):
    labels = [f"spam:{q}" for q in range(1, m + 1)]
    labels += [f"nonlocal:{p},{q}" for p, q in itertools.combinations(range(1, m + 1), 2)]
    return labels


@dataclass(frozen=True)
class SensitivityProfile:
    sensitive_to: frozenset
    insensitive_to: frozenset
    rank_bounds: dict

    def to_dict(self):
        return {"sensitive_to": sorted(self.sensitive_to),
                "insensitive_to": sorted(self.insensitive_to),
                "rank_bounds": dict(sorted(self.rank_bounds.items()))}


def square_rank_bound(scheme, correlation="none"):
    """Generic rank of the scheme's square under a single correlation.

    The data is a network: one state node joined by a ``d^2`` line to every
    measurement node, plus setting lines to rows or columns. ``spam:q``
    attaches qudit ``q``'s setting line to the state node as well;
    ``nonlocal:p,q`` fuses the two measurement nodes. The bound is the
    cheapest way to separate row lines from column lines.
    """
    m, d = scheme.m, scheme.d
    kind, _, rest = correlation.partition(":")
    qs = tuple(int(t) for t in rest.split(",")) if rest else ()
    node_of = {q: q for q in range(1, m + 1)}
    if kind == "nonlocal":
        node_of[qs[1]] = qs[0]
    nodes = sorted({0, *node_of.values()})
    roles = scheme.qudit_roles()
    externals = [(scheme.state.size(d), {0}, LEFT)]
    for q in range(1, m + 1):
        side, slot = roles[q]
        attached = {node_of[q]}
        if kind == "spam" and q == qs[0]:
            attached.add(0)
        externals.append((slot.size(d), attached, side))
    best = None
    for assignment in itertools.product((LEFT, RIGHT), repeat=len(nodes)):
        side_of = dict(zip(nodes, assignment))
        cost = 1
        for q in range(1, m + 1):
            if side_of[0] != side_of[node_of[q]]:
                cost *= d * d
        for size, attached, side in externals:
            if any(side_of[n] != side for n in attached):
                cost *= size
        best = cost if best is None else min(best, cost)
    return best


def sensitivity(scheme):
    """Which single correlations make this scheme's PD nontrivial (generically)."""
    if not scheme.is_square:
        raise ValueError("sensitivity is defined for squares, not bare corners")
    bounds = {label: square_rank_bound(scheme, label) for label in correlation_labels(scheme.m)}
    sens = frozenset(lbl for lbl, b in bounds.items() if b > scheme.rank)
    return SensitivityProfile(sens, frozenset(bounds) - sens, bounds)


# ---------------------------------------------------------------------------
# square assembly


def setting_selection(tensor_shape, scheme, selection=None):
    """Concrete settings per tensor axis, checked against the tensor's shape."""
    selection = dict(selection or {})
    chosen = {}
    for ax, slot in scheme.axis_slots().items():
        need = slot.size(scheme.d)
        settings = tuple(int(s) for s in selection.get(ax, range(need)))
        if len(settings) != need:
            raise InsufficientSettings(f"axis {ax} needs {need} settings, selection gives {len(settings)}")
        if len(set(settings)) != need:
            raise InsufficientSettings(f"axis {ax} selection repeats a setting")
        if max(settings) >= tensor_shape[ax] or min(settings) < 0:
            raise InsufficientSettings(
                f"scheme {scheme.text} needs settings {list(settings)} on axis {ax} "
                f"but the tensor has {tensor_shape[ax]}")
        chosen[ax] = settings
    return chosen


def build_square(tensor, scheme, selection=None):
    """Arrange data into the scheme's square of four displaced corners.

    Rows fuse the state axis then the left qudits in bracket order; columns
    fuse the right qudits in bracket order. A doubled device uses the first
    half of its settings in the top (left) corners and the second half in
    the bottom (right) ones.
    """
    if not scheme.is_square:
        raise ValueError(f"{scheme.text} is a corner, not a square")
    values = getattr(tensor, "values", tensor)
    if values.ndim != scheme.m + 1:
        raise InsufficientSettings(f"tensor has {values.ndim - 1} qudits, scheme needs {scheme.m}")
    if hasattr(tensor, "d") and tensor.d != scheme.d:
        raise ValueError(f"tensor has d={tensor.d}, scheme was parsed with d={scheme.d}")
    chosen = setting_selection(values.shape, scheme, selection)
    slots = scheme.axis_slots()
    order = [scheme.perm[p] for p in range(scheme.m)]
    row_axes = [0] + order[:len(scheme.left)]
    col_axes = order[len(scheme.left):]

    def block(ax, b):
        s = chosen[ax]
        if not slots[ax].doubled:
            return s
        half = len(s) // 2
        return s[:half] if b == 0 else s[half:]

    corners = {}
    for br in (0, 1):
        for bc in (0, 1):
            split = SplitDescriptor(
                tuple(AxisSelection(ax, block(ax, br)) for ax in row_axes),
                tuple(AxisSelection(ax, block(ax, bc)) for ax in col_axes))
            corners[br, bc] = flatten(values, split)
    provenance = {"scheme": scheme.text, "settings": {str(ax): list(s) for ax, s in chosen.items()}}
    return Square(corners[0, 0], corners[0, 1], corners[1, 0], corners[1, 1], provenance=provenance)


def sweep_shape(m, d, ks):
    """Smallest tensor shape that can host every enumerated scheme of the given classes."""
    shape = [1] * (m + 1)
    for k in ks:
        for scheme in enumerate_schemes(m, d, k).variants:
            shape = [max(a, b) for a, b in zip(shape, scheme.required_shape())]
    return tuple(shape)
