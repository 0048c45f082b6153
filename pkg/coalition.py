"""
Reparto del beneficio del paquete entre proveedores: juego cooperativo,
núcleo y valor de Shapley.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Mapping, Sequence, Tuple

from errors import CapacityError, DomainError

logger = logging.getLogger(__name__)

MAX_PLAYERS = 12
CORE_TOL = 1e-9

Coalition = FrozenSet[int]


@dataclass(frozen=True)
class CharacteristicFunction:
    """Valor de cada coalición de los jugadores 1..player_count."""
    player_count: int
    values: Mapping[Coalition, float]

    def __post_init__(self):
        if self.player_count < 1:
            raise DomainError(f"Se necesita al menos un jugador, se recibió {self.player_count}")
        expected = set(_subsets(range(1, self.player_count + 1)))
        missing = expected - set(self.values)
        if missing:
            raise DomainError(f"Faltan coaliciones en el juego: {sorted(sorted(s) for s in missing)}")
        extra = set(self.values) - expected
        if extra:
            raise DomainError(f"Coaliciones con jugadores inexistentes: {sorted(sorted(s) for s in extra)}")
        if self.values[frozenset()] != 0:
            raise DomainError("El valor de la coalición vacía debe ser 0")
        if not all(math.isfinite(v) for v in self.values.values()):
            raise DomainError("Los valores del juego deben ser finitos")

    @property
    def players(self) -> Tuple[int, ...]:
        return tuple(range(1, self.player_count + 1))

    def value(self, coalition: Iterable[int]) -> float:
        return self.values[frozenset(coalition)]

    def __add__(self, other: "CharacteristicFunction") -> "CharacteristicFunction":
        if other.player_count != self.player_count:
            raise DomainError("Solo se suman juegos con el mismo número de jugadores")
        return CharacteristicFunction(self.player_count, {s: v + other.values[s] for s, v in self.values.items()})


@dataclass(frozen=True)
class PayoffAllocation:
    payoffs: Tuple[float, ...]

    def __len__(self) -> int:
        return len(self.payoffs)

    def __getitem__(self, index: int) -> float:
        return self.payoffs[index]


@dataclass(frozen=True)
class CoreInterval:
    """Rango de pagos del jugador 1 en el núcleo de un juego de dos jugadores."""
    lo: float
    hi: float
    empty: bool


@dataclass(frozen=True)
class SharingReport:
    game: CharacteristicFunction
    shapley: PayoffAllocation
    core: CoreInterval
    shapley_in_core: bool


def _subsets(players: Iterable[int]) -> Iterable[Coalition]:
    players = tuple(players)
    for size in range(len(players) + 1):
        for combo in itertools.combinations(players, size):
            yield frozenset(combo)


def game_from_values(player_count: int, values: Mapping[Iterable[int], float]) -> CharacteristicFunction:
    """Construye el juego aceptando cualquier iterable como coalición; el vacío vale 0."""
    table: Dict[Coalition, float] = {frozenset(): 0.0}
    for coalition, value in values.items():
        table[frozenset(coalition)] = float(value)
    return CharacteristicFunction(player_count, table)


def build_game(standalone_profits: Sequence[float], bundle_profit: float,
               bundle_overhead: float = 0.0) -> CharacteristicFunction:
    """
    Juego de dos proveedores: cada uno solo vale su beneficio independiente y
    la gran coalición vale el beneficio del paquete menos un costo fijo
    opcional de operarla.
    """
    if len(standalone_profits) != 2:
        raise DomainError(f"El juego del paquete tiene dos jugadores, se recibieron {len(standalone_profits)}")
    if bundle_overhead < 0:
        raise DomainError(f"El costo fijo del paquete debe ser >= 0, se recibió {bundle_overhead}")
    f1, f2 = standalone_profits
    return game_from_values(2, {(1,): f1, (2,): f2, (1, 2): bundle_profit - bundle_overhead})


def shapley(game: CharacteristicFunction) -> PayoffAllocation:
    """
    Valor de Shapley por enumeración exacta de subconjuntos: el aporte
    marginal de cada jugador promediado sobre todos los órdenes de llegada.

    Raises:
        CapacityError: más de MAX_PLAYERS jugadores
    """
    n = game.player_count
    if n > MAX_PLAYERS:
        raise CapacityError(f"Shapley exacto admite hasta {MAX_PLAYERS} jugadores, se recibieron {n}")

    weights = [math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)]
    payoffs = []
    for player in game.players:
        others = [p for p in game.players if p != player]
        total = 0.0
        for coalition in _subsets(others):
            total += weights[len(coalition)] * (game.values[coalition | {player}] - game.values[coalition])
        payoffs.append(total)
    return PayoffAllocation(tuple(payoffs))


def core_membership(game: CharacteristicFunction, allocation: PayoffAllocation) -> bool:
    """Racionalidad grupal (eficiencia) e individual para toda coalición, con tolerancia 1e-9."""
    if len(allocation) != game.player_count:
        raise DomainError(f"La asignación tiene {len(allocation)} pagos para {game.player_count} jugadores")
    grand = frozenset(game.players)
    if abs(sum(allocation.payoffs) - game.values[grand]) > CORE_TOL:
        return False
    for coalition, value in game.values.items():
        if sum(allocation[p - 1] for p in coalition) < value - CORE_TOL:
            return False
    return True


def core_interval_2p(game: CharacteristicFunction) -> CoreInterval:
    """Núcleo de dos jugadores como intervalo [F1, FK - F2] para el pago del jugador 1."""
    if game.player_count != 2:
        raise DomainError(f"El intervalo del núcleo es para dos jugadores, el juego tiene {game.player_count}")
    f1, f2 = game.value({1}), game.value({2})
    fk = game.value({1, 2})
    return CoreInterval(lo=f1, hi=fk - f2, empty=fk < f1 + f2)


def share_bundle(standalone_profits: Sequence[float], bundle_profit: float,
                 bundle_overhead: float = 0.0) -> SharingReport:
    """Reparto completo: juego, Shapley, núcleo y si Shapley está en el núcleo."""
    game = build_game(standalone_profits, bundle_profit, bundle_overhead)
    allocation = shapley(game)
    core = core_interval_2p(game)
    in_core = core_membership(game, allocation)
    if core.empty:
        logger.warning(f"⚠️ Núcleo vacío: el paquete ({game.value({1, 2}):.6g}) vale menos que "
                       f"la venta separada ({game.value({1}) + game.value({2}):.6g})")
    else:
        logger.info(f"✅ Shapley=({allocation[0]:.6g}, {allocation[1]:.6g}), núcleo=[{core.lo:.6g}, {core.hi:.6g}]")
    return SharingReport(game=game, shapley=allocation, core=core, shapley_in_core=in_core)
