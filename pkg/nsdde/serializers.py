import io
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from django.conf import settings
from dotenv import dotenv_values
from rest_framework import serializers

from .exceptions import ConfigError
from .grid import TimeGrid, make_grid
from .scheme import SchemeConfig, SchemeKind
from .systems import BUILTIN_SYSTEMS, BuiltinSystem, StabilityParams

DEFAULTS = settings.NSDDE

LINEAR_PARAMETERS = ('kappa0', 'a', 'btilde', 's')


class SystemSerializer(serializers.Serializer):
    name = serializers.ChoiceField(choices=sorted(BUILTIN_SYSTEMS))
    kappa0 = serializers.FloatField(default=0.1)
    a = serializers.FloatField(default=2.0)
    btilde = serializers.FloatField(default=0.25)
    s = serializers.FloatField(default=0.25)

    def validate_kappa0(self, value):
        if not abs(value) < 1:
            raise serializers.ValidationError(
                "kappa0 must satisfy |kappa0| < 1 (neutral term contraction)"
            )
        return value


class SegmentSerializer(serializers.Serializer):
    value = serializers.FloatField(default=1.0)


class GridSerializer(serializers.Serializer):
    tau = serializers.FloatField(default=1.0)
    T = serializers.FloatField(default=20.0)
    m = serializers.IntegerField(default=10, min_value=1)

    def validate_tau(self, value):
        if not value > 0:
            raise serializers.ValidationError("tau must be positive")
        return value


class SchemeSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(
        choices=[k.value for k in SchemeKind], default=SchemeKind.TAMED.value
    )
    alpha = serializers.FloatField(default=DEFAULTS['ALPHA'])

    def validate_alpha(self, value):
        if not 0 < value <= 0.5:
            raise serializers.ValidationError(
                "alpha must lie in (0, 0.5] (tamed drift exponent range)"
            )
        return value


class EnsembleSerializer(serializers.Serializer):
    N = serializers.IntegerField(default=DEFAULTS['PATH_COUNT'], min_value=2)
    seed = serializers.IntegerField(default=DEFAULTS['SEED'], min_value=0)


class StabilitySerializer(serializers.Serializer):
    lambda1 = serializers.FloatField(default=DEFAULTS['LAMBDA1'])
    lambda2 = serializers.FloatField(default=DEFAULTS['LAMBDA2'])
    lambda3 = serializers.FloatField(default=DEFAULTS['LAMBDA3'])
    K_tilde = serializers.FloatField(default=None, allow_null=True)
    kappa = serializers.FloatField(default=None, allow_null=True)
    window = serializers.FloatField(default=DEFAULTS['WINDOW_FRACTION'])
    as_tail = serializers.FloatField(default=DEFAULTS['AS_TAIL_FRACTION'])

    def validate_lambda1(self, value):
        if not value > 2:
            raise serializers.ValidationError("lambda1 must exceed 2")
        return value

    def validate_K_tilde(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("K_tilde must be positive")
        return value

    def validate_kappa(self, value):
        if value is not None and not 0 <= value < 1:
            raise serializers.ValidationError("kappa must lie in [0, 1)")
        return value

    def validate_window(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError(
                "window must lie in (0, 1]"
            )
        return value

    def validate_as_tail(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError("as_tail must lie in (0, 1]")
        return value

    def validate(self, attrs):
        if not attrs['lambda2'] > attrs['lambda3'] > 0:
            raise serializers.ValidationError(
                "lambda2 > lambda3 > 0 is required"
            )
        return attrs


class OutputSerializer(serializers.Serializer):
    dir = serializers.CharField(default=DEFAULTS['DEFAULT_OUT_DIR'])


class RunSerializer(serializers.Serializer):
    strict = serializers.BooleanField(default=False)


class ExperimentConfigSerializer(serializers.Serializer):
    system = SystemSerializer()
    segment = SegmentSerializer()
    grid = GridSerializer()
    scheme = SchemeSerializer()
    ensemble = EnsembleSerializer()
    stability = StabilitySerializer()
    out = OutputSerializer()
    run = RunSerializer()


@dataclass(frozen=True)
class ExperimentConfig:
    system: BuiltinSystem
    segment_value: float
    grid: TimeGrid
    scheme: SchemeConfig
    N: int
    seed: int
    params: StabilityParams
    K_tilde: Optional[float]
    kappa: Optional[float]
    window_fraction: float
    as_tail_fraction: float
    out_dir: Path
    strict: bool = False
    resolved: dict = field(default_factory=dict, compare=False)

    def echo(self):
        """Resolved key = value lines, in documented key order."""
        return [f"{key} = {value}" for key, value in self.resolved.items()]


def known_keys():
    return {
        f"{group}.{name}"
        for group, child in ExperimentConfigSerializer().fields.items()
        for name in child.fields
    }


def _flatten_errors(errors, prefix=''):
    for key, value in errors.items():
        name = prefix if key == 'non_field_errors' else (
            f"{prefix}.{key}" if prefix else key)
        if isinstance(value, dict):
            yield from _flatten_errors(value, name)
        else:
            for message in value:
                yield name, str(message)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a `group.key = value` experiment document."""
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    allowed = known_keys()
    data = {group: {} for group in ExperimentConfigSerializer().fields}
    for key, value in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", key=key)
        if value is None:
            raise ConfigError(f"key {key!r} has no value", key=key)
        group, name = key.split('.', 1)
        data[group][name] = value

    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        problems = list(_flatten_errors(serializer.errors))
        raise ConfigError(
            '; '.join(f"{key}: {message}" for key, message in problems),
            key=problems[0][0],
        )
    v = serializer.validated_data

    system_data = dict(v['system'])
    name = system_data.pop('name')
    given = [p for p in LINEAR_PARAMETERS if p in data['system']]
    if name != 'linear' and given:
        raise ConfigError(
            f"system.{given[0]}: coefficients {given} only apply to the "
            f"linear system",
            key=f"system.{given[0]}",
        )
    parameters = system_data if name == 'linear' else {}
    grid = make_grid(v['grid']['tau'], v['grid']['T'], v['grid']['m'])
    scheme = SchemeConfig(
        alpha=v['scheme']['alpha'],
        kind=v['scheme']['kind'],
        divergence_threshold=DEFAULTS['DIVERGENCE_THRESHOLD'],
    )
    stability = v['stability']
    params = StabilityParams(
        stability['lambda1'], stability['lambda2'], stability['lambda3']
    )

    resolved = {'system.name': name}
    resolved.update({f"system.{k}": p for k, p in parameters.items()})
    for group in ('segment', 'grid', 'scheme', 'ensemble', 'stability',
                  'out', 'run'):
        resolved.update({f"{group}.{k}": val for k, val in v[group].items()})
    resolved['grid.h'] = grid.h
    resolved['grid.M'] = grid.M

    return ExperimentConfig(
        system=BuiltinSystem(name=name, parameters=parameters),
        segment_value=v['segment']['value'],
        grid=grid,
        scheme=scheme,
        N=v['ensemble']['N'],
        seed=v['ensemble']['seed'],
        params=params,
        K_tilde=stability['K_tilde'],
        kappa=stability['kappa'],
        window_fraction=stability['window'],
        as_tail_fraction=stability['as_tail'],
        out_dir=Path(v['out']['dir']),
        strict=v['run']['strict'],
        resolved=resolved,
    )


def config_as_dict(config: ExperimentConfig) -> dict:
    """JSON-friendly view of a resolved config, for the run ledger."""
    data = dict(config.resolved)
    data['scheme.kind'] = config.scheme.kind.value
    data['out.dir'] = str(config.out_dir)
    data['params'] = asdict(config.params)
    return data
