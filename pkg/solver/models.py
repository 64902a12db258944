from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Owner(str, Enum):
    P0 = "p0"
    P1 = "p1"
    RANDOM = "rand"


class Mode(str, Enum):
    SAS = "sas"
    SLS = "sls"


class NodeKind(str, Enum):
    """Role of a reduced-game configuration with respect to the original game."""
    ANCHOR = "anchor"
    RELAY = "relay"
    BAR = "bar"
    TILDE = "tilde"
    HAT = "hat"
    SINK = "sink"


class ParityObjective(BaseModel):
    model_config = ConfigDict(frozen=True)

    prio: tuple[int, ...] = Field(..., description="Priority per configuration, lowest recurring priority must be even")

    @field_validator("prio")
    @classmethod
    def _non_negative(cls, prio: tuple[int, ...]) -> tuple[int, ...]:
        for v, p in enumerate(prio):
            if p < 0:
                raise ValueError(f"negative priority {p} at config {v}")
        return prio

    @property
    def index(self) -> int:
        return max(self.prio, default=0)

    def odd_priorities(self) -> list[int]:
        return sorted({p for p in self.prio if p % 2 == 1})

    def accepts(self, recurring: Iterable[int]) -> bool:
        """True when the minimal priority among the given recurring configs is even."""
        return min(self.prio[v] for v in recurring) % 2 == 0

    @classmethod
    def buchi(cls, n: int, members: Iterable[int]) -> "ParityObjective":
        good = set(members)
        return cls(prio=tuple(0 if v in good else 1 for v in range(n)))


class TargetSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    members: frozenset[int] = Field(default_factory=frozenset, description="Configurations of the target or Büchi set")

    def __contains__(self, v: int) -> bool:
        return v in self.members


class CombinedObjective(BaseModel):
    model_config = ConfigDict(frozen=True)

    sure: ParityObjective = Field(..., description="Objective that must hold on every consistent play")
    secondary: ParityObjective = Field(..., description="Objective that must hold almost surely or limit surely")
    mode: Mode = Field(Mode.SAS, description="Criterion of the secondary objective")


class StochasticGame(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field("game", description="Name of the game")
    owner: tuple[Owner, ...] = Field(..., description="Owner of each configuration")
    edges: tuple[tuple[int, ...], ...] = Field(..., description="Ordered successor list of each configuration")
    prob: dict[int, dict[int, Fraction]] = Field(default_factory=dict, description="Transition probabilities of random configurations")
    labels: Optional[tuple[Optional[str], ...]] = Field(None, description="Optional display labels")
    init: Optional[int] = Field(None, description="Initial configuration")
    sure: Optional[ParityObjective] = Field(None, description="Sure (first) parity objective carried with the game")
    secondary: Optional[ParityObjective] = Field(None, description="Secondary parity objective carried with the game")

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data: Any) -> Any:
        if isinstance(data, dict):
            labels = data.get("labels")
            if labels is not None and all(label is None for label in labels):
                data = {**data, "labels": None}
            prob = data.get("prob")
            if prob:
                data = {**data, "prob": {v: dict(dist) for v, dist in prob.items() if dist}}
        return data

    @property
    def n(self) -> int:
        return len(self.owner)

    @property
    def configs(self) -> range:
        return range(len(self.owner))

    def owned_by(self, owner: Owner) -> list[int]:
        return [v for v, o in enumerate(self.owner) if o == owner]

    @property
    def is_mdp(self) -> bool:
        return Owner.P1 not in self.owner

    @property
    def is_non_stochastic(self) -> bool:
        return Owner.RANDOM not in self.owner

    def label(self, v: int) -> str:
        if self.labels is not None and self.labels[v] is not None:
            return self.labels[v]
        return str(v)

    def predecessors(self) -> list[list[int]]:
        pred: list[list[int]] = [[] for _ in self.configs]
        for v, succ in enumerate(self.edges):
            for w in succ:
                if not pred[w] or pred[w][-1] != v:
                    pred[w].append(v)
        return pred

    def objective(self) -> CombinedObjective:
        if self.sure is None or self.secondary is None:
            raise ValueError(f"game {self.name} does not carry both objectives")
        return CombinedObjective(sure=self.sure, secondary=self.secondary)

    def with_objectives(
        self,
        sure: Optional[ParityObjective] = None,
        secondary: Optional[ParityObjective] = None,
    ) -> "StochasticGame":
        return self.model_copy(update={"sure": sure, "secondary": secondary})


class MemorylessStrategy(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field("strategy", description="Strategy name")
    player: int = Field(..., description="Player the strategy belongs to (0 or 1)")
    choice: dict[int, int] = Field(default_factory=dict, description="Chosen successor per owned configuration")


class FiniteMemoryStrategy(BaseModel):
    """Mealy machine: update(m, w) reads the next configuration, output(m, v) picks the move at v."""
    model_config = ConfigDict(frozen=True)

    name: str = Field("strategy", description="Strategy name")
    player: int = Field(0, description="Player the strategy belongs to")
    memory: int = Field(..., description="Number of memory states")
    m0: int = Field(0, description="Initial memory state")
    update: dict[tuple[int, int], int] = Field(default_factory=dict, description="Memory update (m, w) -> m'")
    output: dict[tuple[int, int], int] = Field(default_factory=dict, description="Move (m, v) -> successor")

    def next_memory(self, m: int, w: int) -> int:
        if self.memory == 1:
            return 0
        try:
            return self.update[(m, w)]
        except KeyError:
            raise ValueError(f"strategy {self.name} has no update at memory {m}, config {w}")

    def choose(self, m: int, v: int) -> int:
        try:
            return self.output[(m, v)]
        except KeyError:
            raise ValueError(f"strategy {self.name} has no move at memory {m}, config {v}")


class MarkovChain(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    states: tuple[tuple[int, int], ...] = Field(..., description="Chain states as (memory, config) pairs")
    edges: dict[int, dict[int, Fraction]] = Field(..., description="Transition probabilities between chain states")
    init: int = Field(0, description="Initial chain state")

    def config_of(self, s: int) -> int:
        return self.states[s][1]


class ParitySolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    w0: frozenset[int] = Field(..., description="Player-0 winning region")
    w1: frozenset[int] = Field(..., description="Player-1 winning region")
    strat0: MemorylessStrategy = Field(..., description="Player-0 memoryless strategy, winning on w0")
    strat1: MemorylessStrategy = Field(..., description="Player-1 memoryless strategy, winning on w1")


class StreettPairs(BaseModel):
    model_config = ConfigDict(frozen=True)

    pairs: tuple[tuple[frozenset[int], frozenset[int]], ...] = Field(..., description="(request, response) pairs")

    def __len__(self) -> int:
        return len(self.pairs)


class IarProduct(BaseModel):
    """Game x index-appearance record; the carried sure objective is the equivalent parity condition."""
    model_config = ConfigDict(frozen=True)

    game: StochasticGame
    states: tuple[tuple[int, tuple[tuple[int, ...], int]], ...] = Field(..., description="(config, (permutation, pointer)) per product config")
    entry: tuple[int, ...] = Field(..., description="Product config reached when play starts in each original config")
    pairs: StreettPairs


class ConjSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    w0: frozenset[int]
    w1: frozenset[int]
    strat0: FiniteMemoryStrategy
    strat1: MemorylessStrategy


class NodeInfo(BaseModel):
    """Where a reduced-game configuration comes from in the original game."""
    model_config = ConfigDict(frozen=True)

    origin: Optional[int] = Field(None, description="Original configuration, None for sinks")
    kind: NodeKind = Field(NodeKind.ANCHOR, description="Role of the configuration")
    index: Optional[int] = Field(None, description="Gadget index for tilde and hat configurations")
    layer: tuple[Hashable, ...] = Field((), description="Copy, monitor and record components")


class ReductionStage(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Stage name")
    game: StochasticGame = Field(..., description="Game produced by this stage")
    origin: tuple[Optional[int], ...] = Field(..., description="Previous-stage configuration of each new configuration")
    annotations: tuple[str, ...] = Field(..., description="Per-configuration annotation")
    info: tuple[NodeInfo, ...] = Field(..., description="Per-configuration relation to the original game")
    buchi: Optional[TargetSet] = Field(None, description="Büchi set produced by this stage, if any")


class ReductionTrace(BaseModel):
    stages: list[ReductionStage] = Field(default_factory=list)

    def stage_sizes(self) -> dict[str, int]:
        return {stage.name: stage.game.n for stage in self.stages}


class GadgetMap(BaseModel):
    model_config = ConfigDict(frozen=True)

    entry: tuple[int, ...] = Field(..., description="Reduced configuration entered when an original configuration is reached")
    bar: dict[int, int] = Field(default_factory=dict, description="Random config -> its barred copy")
    tilde: dict[tuple[int, int], int] = Field(default_factory=dict, description="(config, 2i) -> tilde copy")
    hat: dict[tuple[int, int], int] = Field(default_factory=dict, description="(config, j) -> hat copy")
    origin: tuple[int, ...] = Field(..., description="Original configuration of each reduced configuration")
    role: tuple[str, ...] = Field(..., description="Role annotation of each reduced configuration")


class Ranking(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    vectors: dict[int, Optional[tuple[int, ...]]] = Field(..., description="Rank vector per configuration, None stands for infinity")
    length: int = Field(..., description="Number of components (one per odd priority)")
    epsilon: Fraction = Field(..., description="Minimal transition probability of the ranked game")


class PullBack(BaseModel):
    """A pulled-back strategy together with the reduced anchor behind each of its memory states."""
    model_config = ConfigDict(frozen=True)

    strategy: FiniteMemoryStrategy
    members: dict[int, dict[int, int]] = Field(..., description="memory -> original config -> reduced anchor")


class SasMdpSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    w0: frozenset[int]
    strategy: FiniteMemoryStrategy
    trace: ReductionTrace


class SasGameSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    w0: frozenset[int]
    w1: frozenset[int]
    strat0: FiniteMemoryStrategy
    strat1: MemorylessStrategy
    gadget_map: GadgetMap
    trace: ReductionTrace
    members: dict[int, dict[int, int]] = Field(..., description="memory of strat0 -> original config -> reduced anchor")
    reduced: StochasticGame = Field(..., description="Solved parity game the strategy was pulled back from")
    reduced_secondary: ParityObjective = Field(..., description="Secondary priorities of the solved game")
    tau: MemorylessStrategy = Field(..., description="Positional Player-0 strategy on the solved game")


class EpsilonStrategy(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    epsilon: Fraction
    horizon: int = Field(..., description="Number of Player-0 decisions made by the reach strategy")
    guaranteed: Fraction = Field(..., description="Guaranteed probability of reaching the SAS region")
    conservative: bool = Field(False, description="Horizon comes from the closed-form bound instead of enumeration")
    strategy: FiniteMemoryStrategy


class SlsSolution(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    z: frozenset[int] = Field(..., description="Limit-sure winning region")
    sas_region: frozenset[int]
    sure_region: frozenset[int]
    strategy_builder: Callable[[Fraction], EpsilonStrategy]


class SimulationResult(BaseModel):
    visit_frequency: dict[int, float] = Field(..., description="Share of trials visiting each configuration")
    final_frequency: dict[int, float] = Field(..., description="Distribution of the configuration after the last step")


class SolveOutcome(BaseModel):
    mode: str
    model: str
    region: frozenset[int]
    memory: Optional[int] = None
    fields: list[tuple[str, str]] = Field(default_factory=list, description="Ordered report lines after mode and model")
    strategies: dict[str, FiniteMemoryStrategy] = Field(default_factory=dict, description="Emitted strategies by file stem")


class RunReport(BaseModel):
    command: str
    inputs: dict[str, str] = Field(default_factory=dict, description="Input name -> sha256 digest")
    fields: list[tuple[str, str]] = Field(default_factory=list, description="Ordered report lines")
    timing: Optional[float] = Field(None, description="Wall time in seconds, only reported on request")


class SolveRequest(BaseModel):
    game: str = Field(..., description="Game in the text format")
    mode: str = Field("sas", description="parity, conj, sas or sls")
    epsilon: Optional[str] = Field(None, description="Error bound for sls, as num/den")


class SolveResponse(BaseModel):
    mode: str
    region: list[int]
    memory: Optional[int] = None
    strategy: Optional[str] = Field(None, description="Player-0 strategy in the text format")
    details: dict[str, str] = Field(default_factory=dict)


class VerifyRequest(BaseModel):
    game: str = Field(..., description="Game in the text format")
    strategy: str = Field(..., description="Strategy in the text format")
    starts: Optional[list[int]] = None


class VerifyResponse(BaseModel):
    verified: bool


class ErrorResponse(BaseModel):
    detail: str = Field(..., description="Error message")


class HealthResponse(BaseModel):
    status: str = Field(..., description="Service status")
    version: str = Field(..., description="API version")
    uptime: float = Field(..., description="Service uptime in seconds")
