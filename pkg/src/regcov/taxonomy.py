"""Code of Practice taxonomy: capability and propensity codes, their names,
and the mapping from systemic risks to component codes.

Everything here is immutable once built and safe to share between threads.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import ConfigError, UnknownCode, UnknownRisk

__all__ = [
    "Kind",
    "CategoryCode",
    "CategoryDef",
    "SystemicRisk",
    "RiskMap",
    "parse_code",
    "all_categories",
    "capabilities",
    "propensities",
    "category",
    "code_for_name",
    "risk_components",
    "default_risk_map",
    "load_risk_map",
]


class Kind(str, enum.Enum):
    CAPABILITY = "C"
    PROPENSITY = "P"

    @property
    def size(self) -> int:
        return 13 if self is Kind.CAPABILITY else 9

    @property
    def label(self) -> str:
        return "Capability" if self is Kind.CAPABILITY else "Propensity"


@dataclass(frozen=True, order=True)
class CategoryCode:
    """One taxonomy code such as ``C6`` or ``P3``.

    Ordering puts every capability before every propensity, then by index.
    """

    kind: Kind
    index: int

    def __post_init__(self):
        if not isinstance(self.kind, Kind):
            raise UnknownCode(f"{self.kind}{self.index}")
        if isinstance(self.index, bool) or not isinstance(self.index, int):
            raise UnknownCode(f"{self.kind.value}{self.index}")
        if not 1 <= self.index <= self.kind.size:
            raise UnknownCode(f"{self.kind.value}{self.index}")

    def __str__(self) -> str:
        return f"{self.kind.value}{self.index}"

    def __repr__(self) -> str:
        return f"CategoryCode({self})"

    @property
    def is_capability(self) -> bool:
        return self.kind is Kind.CAPABILITY


_CODE_RE = re.compile(r"([CP])([1-9][0-9]?)")


def parse_code(text: str) -> CategoryCode:
    """Parse the canonical text form of a code.

    Strict: ``"C6"`` parses, ``"c6"``, ``" C6"``, ``"C06"`` and ``"C14"`` raise
    :class:`UnknownCode`.
    """
    if not isinstance(text, str):
        raise UnknownCode(repr(text))
    m = _CODE_RE.fullmatch(text)
    if m is None:
        raise UnknownCode(text)
    return CategoryCode(Kind(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class CategoryDef:
    code: CategoryCode
    name: str
    description: str


_CAPABILITY_ROWS = [
    ("Offensive cyber capabilities",
     "The ability to identify vulnerabilities, generate exploits, or assist in cyberattacks"),
    ("CBRN capabilities",
     "Knowledge and reasoning about chemical, biological, radiological, or nuclear threats"),
    ("Manipulate, persuade, or deceive",
     "Capacity to influence human beliefs or behaviors through sophisticated argumentation or deception"),
    ("Autonomy",
     "Ability to operate independently, make decisions, or pursue goals without human oversight"),
    ("Adaptively learn new tasks",
     "Capability to acquire new skills or knowledge through interaction or experience"),
    ("Long-horizon planning, forecasting, or strategising",
     "Capacity for complex multi-step reasoning and strategic thinking"),
    ("Self-reasoning",
     "Ability to reflect on and reason about its own processes, knowledge, or limitations"),
    ("Evade human oversight",
     "Potential to obscure its operations or mislead human monitors"),
    ("Self-replicate, self-improve, or modify own implementation",
     "Capability to alter its own code or create copies"),
    ("Automated AI research and development",
     "Ability to contribute to AI advancement autonomously"),
    ("Process multiple modalities",
     "Integration of text, image, audio, or other data types"),
    ("Use tools, including computer use",
     "Capability to interact with external systems or APIs"),
    ("Control physical systems",
     "Ability to operate robots, vehicles, or other physical devices"),
]

_PROPENSITY_ROWS = [
    ("Misalignment with human intent or values",
     "Tendency to interpret or pursue goals in ways conflicting with human intentions"),
    ("Tendency to deploy capabilities in harmful ways",
     "Propensity to apply capabilities toward harmful outcomes"),
    ("Tendency to hallucinate",
     "Generation of false or unsupported information presented as fact"),
    ("Discriminatory bias",
     "Systematic unfair treatment of individuals or groups"),
    ("Lack of performance reliability",
     "Inconsistent or unpredictable behavior across similar inputs"),
    ("Lawlessness",
     "Tendency to suggest or facilitate illegal activities"),
    ("Goal-pursuing, harmful resistance, or power-seeking",
     "Problematic agency behaviors including resistance to goal modification"),
    ("Colluding with other AI models/systems",
     "Coordination with other systems against human interests"),
    ("Mis-coordination or conflict with other AI models",
     "Harmful interactions between systems"),
]


def _build_defs() -> tuple[CategoryDef, ...]:
    defs = []
    for kind, rows in ((Kind.CAPABILITY, _CAPABILITY_ROWS), (Kind.PROPENSITY, _PROPENSITY_ROWS)):
        for i, (name, desc) in enumerate(rows, start=1):
            defs.append(CategoryDef(CategoryCode(kind, i), name, desc))
    return tuple(defs)


_DEFS = _build_defs()
_BY_CODE = MappingProxyType({d.code: d for d in _DEFS})
_BY_NAME = MappingProxyType({d.name: d.code for d in _DEFS})


def all_categories() -> list[CategoryDef]:
    """All 22 definitions, C1..C13 then P1..P9."""
    return list(_DEFS)


def capabilities() -> list[CategoryCode]:
    return [d.code for d in _DEFS if d.code.kind is Kind.CAPABILITY]


def propensities() -> list[CategoryCode]:
    return [d.code for d in _DEFS if d.code.kind is Kind.PROPENSITY]


def category(code: CategoryCode | str) -> CategoryDef:
    if isinstance(code, str):
        code = parse_code(code)
    return _BY_CODE[code]


def code_for_name(name: str) -> CategoryCode:
    """Inverse of ``category(code).name``; used to read enriched records back."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownCode(name) from None


class SystemicRisk(str, enum.Enum):
    HARMFUL_MANIPULATION = "HarmfulManipulation"
    CYBER_OFFENCE = "CyberOffence"
    CBRN_RISKS = "CbrnRisks"
    LOSS_OF_CONTROL = "LossOfControl"

    @property
    def display_name(self) -> str:
        return _RISK_DISPLAY[self]

    @classmethod
    def parse(cls, name: "SystemicRisk | str") -> "SystemicRisk":
        if isinstance(name, SystemicRisk):
            return name
        for risk in cls:
            if name in (risk.value, risk.name, risk.display_name):
                return risk
        raise UnknownRisk(name)


_RISK_DISPLAY = {
    SystemicRisk.HARMFUL_MANIPULATION: "Harmful Manipulation",
    SystemicRisk.CYBER_OFFENCE: "Cyber Offence",
    SystemicRisk.CBRN_RISKS: "CBRN Risks",
    SystemicRisk.LOSS_OF_CONTROL: "Loss of Control",
}


class RiskMap(Mapping):
    """Read-only mapping ``SystemicRisk -> frozenset[CategoryCode]``.

    Component order as listed in the source file is kept in ``ordered``
    so reports can print components the way the mapping author wrote them.
    """

    def __init__(self, components: Mapping[SystemicRisk | str, Iterable[CategoryCode | str]]):
        ordered: dict[SystemicRisk, tuple[CategoryCode, ...]] = {}
        for name, codes in components.items():
            risk = SystemicRisk.parse(name)
            seq = []
            for c in codes:
                code = c if isinstance(c, CategoryCode) else parse_code(c)
                if code not in seq:
                    seq.append(code)
            ordered[risk] = tuple(seq)
        self.ordered = MappingProxyType(ordered)
        self._sets = {r: frozenset(cs) for r, cs in ordered.items()}

    def __getitem__(self, risk):
        try:
            return self._sets[SystemicRisk.parse(risk)]
        except UnknownRisk:
            raise
        except KeyError:
            raise UnknownRisk(str(risk)) from None

    def __iter__(self):
        return iter(self._sets)

    def __len__(self):
        return len(self._sets)

    def to_json(self) -> dict[str, list[str]]:
        return {r.value: [str(c) for c in cs] for r, cs in self.ordered.items()}


def load_risk_map(source: str | Path | Mapping) -> RiskMap:
    """Load a ``{riskName: [codes...]}`` mapping from a JSON file or a dict.

    Unknown risk names or codes raise :class:`ConfigError`.
    """
    if isinstance(source, Mapping):
        data = source
    else:
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    if not isinstance(data, Mapping):
        raise ConfigError("risk map must be a JSON object")
    try:
        for codes in data.values():
            if not isinstance(codes, list):
                raise ConfigError("risk map values must be lists of codes")
        return RiskMap(data)
    except (UnknownCode, UnknownRisk) as exc:
        raise ConfigError(f"invalid risk map: {exc}") from exc


_DEFAULT_RISK_MAP: RiskMap | None = None


def default_risk_map() -> RiskMap:
    global _DEFAULT_RISK_MAP
    if _DEFAULT_RISK_MAP is None:
        text = resources.files("regcov.data").joinpath("risk_map.json").read_text("utf-8")
        _DEFAULT_RISK_MAP = load_risk_map(json.loads(text))
    return _DEFAULT_RISK_MAP


def risk_components(risk: SystemicRisk | str, risk_map: RiskMap | None = None) -> frozenset[CategoryCode]:
    """Component codes of ``risk`` under ``risk_map`` (bundled default if None)."""
    risk_map = risk_map if risk_map is not None else default_risk_map()
    return risk_map[SystemicRisk.parse(risk)]
