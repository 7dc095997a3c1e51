"""Experiment-config schema.

``ExperimentConfigSerializer`` checks the envelope shared by every command and
hands the ``inputs`` block to the command's own serializer, whose validated
data holds parsed domain objects ready for dispatch.
"""

from fractions import Fraction

from django.core.exceptions import ValidationError
from rest_framework import serializers

from nilmix.algebra.numberfield import NumberField
from nilmix.algebra.polynomials import IntPolynomial
from nilmix.cocycle.cocycles import TorusCocycle
from nilmix.conf import get_setting
from nilmix.diophantine.sunits import SUnitInstance
from nilmix.models import COMMANDS, FORMATS
from nilmix.nilmanifold.bumps import function_from_json
from nilmix.nilmanifold.boxmaps import BoxMap, Projection
from nilmix.nilmanifold.heisenberg import HeisAction
from nilmix.nilmanifold.montecarlo import MIN_SAMPLES
from nilmix.spectrum.action import ZlAction
from nilmix.toral.fitting import MODELS
from nilmix.toral.trig import TrigPolynomial

MC_EXPECTATIONS = ["none", "product", "square"]


class DomainField(serializers.Field):
    """A JSON block parsed into a domain object by ``parse``."""

    default_error_messages = {"malformed": "Malformed block: {error}"}

    def parse(self, data):
        raise NotImplementedError

    def to_internal_value(self, data):
        try:
            return self.parse(data)
        except ValidationError as e:
            raise serializers.ValidationError(e.messages)
        except (KeyError, TypeError, ValueError, ArithmeticError) as e:
            self.fail("malformed", error=repr(e))

    def to_representation(self, value):
        return value.to_json()


class ActionField(DomainField):
    def parse(self, data):
        return ZlAction.from_json(data)


class HeisActionField(DomainField):
    def parse(self, data):
        return HeisAction.from_json(data)


class TrigPolynomialField(DomainField):
    def parse(self, data):
        return TrigPolynomial.from_json(data)


class HolderFunctionField(DomainField):
    def parse(self, data):
        return function_from_json(data)


class SUnitInstanceField(DomainField):
    def parse(self, data):
        return SUnitInstance.from_json(data)


class BoxMapField(DomainField):
    def parse(self, data):
        return BoxMap.from_json(data)


class ProjectionField(DomainField):
    def parse(self, data):
        return Projection.from_json(data)


class CocycleField(DomainField):
    def parse(self, data):
        return TorusCocycle.from_json(data)


class NumberFieldField(DomainField):
    """Defining polynomial, integer coefficients highest degree first."""

    def parse(self, data):
        return NumberField(IntPolynomial(tuple(int(c) for c in data)))

    def to_representation(self, value):
        return value.modulus.to_json()


class FractionField(serializers.CharField):
    """Exact rational given as a number or a string such as ``"1/20"``."""

    def to_internal_value(self, data):
        text = super().to_internal_value(data)
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise serializers.ValidationError(f"{text!r} is not a rational number")

    def to_representation(self, value):
        return str(value)


def _vector(**kwargs):
    return serializers.ListField(child=serializers.IntegerField(), min_length=1, **kwargs)


def _shape(**kwargs):
    return serializers.ListField(child=_vector(), min_length=2, **kwargs)


def _point(**kwargs):
    return serializers.ListField(
        child=serializers.FloatField(), min_length=3, max_length=3, **kwargs
    )


def element(field: NumberField, value):
    """Power-basis coordinates (low degree first); a bare number is rational."""
    coords = value if isinstance(value, (list, tuple)) else [value]
    try:
        return field.element([Fraction(str(c)) for c in coords])
    except (ValueError, ZeroDivisionError):
        raise serializers.ValidationError(f"{value!r} is not an element of {field}")


def _check_rank(action, vectors, name: str):
    for index, z in enumerate(vectors):
        if len(z) != action.rank:
            raise serializers.ValidationError(
                {name: f"Entry {index} has length {len(z)}, the action has rank {action.rank}"}
            )


class ActionInputSerializer(serializers.Serializer):
    action = ActionField()


class AnosovInputSerializer(ActionInputSerializer):
    elements = serializers.ListField(child=_vector(), min_length=1)

    def validate(self, attrs):
        _check_rank(attrs["action"], attrs["elements"], "elements")
        if any(not any(z) for z in attrs["elements"]):
            raise serializers.ValidationError({"elements": "z = 0 is never Anosov"})
        return attrs


class LyapunovInputSerializer(ActionInputSerializer):
    verify_radius = serializers.IntegerField(min_value=0, default=0)


class HeightInputSerializer(serializers.Serializer):
    field = NumberFieldField()
    elements = serializers.ListField(child=serializers.JSONField(), default=list)
    vectors = serializers.ListField(
        child=serializers.ListField(child=serializers.JSONField(), min_length=1), default=list
    )

    def validate(self, attrs):
        if not attrs["elements"] and not attrs["vectors"]:
            raise serializers.ValidationError("Give at least one element or vector")
        field = attrs["field"]
        attrs["elements"] = [element(field, x) for x in attrs["elements"]]
        if any(x.is_zero for x in attrs["elements"]):
            raise serializers.ValidationError({"elements": "The height of 0 is undefined"})
        attrs["vectors"] = [[element(field, x) for x in v] for v in attrs["vectors"]]
        return attrs


class WaldschmidtInputSerializer(serializers.Serializer):
    field = NumberFieldField()
    u_list = serializers.ListField(child=serializers.JSONField(), min_length=1)
    # a single instance (u, z) ...
    u = serializers.JSONField(required=False)
    z = _vector(required=False)
    # ... or a calibration grid
    u_values = serializers.ListField(child=serializers.JSONField(), min_length=1, required=False)
    z_max = serializers.IntegerField(min_value=1, required=False)
    refine = serializers.BooleanField(default=True)
    params = serializers.DictField(required=False)
    embedding = serializers.IntegerField(min_value=0, default=0)

    def validate(self, attrs):
        single = "u" in attrs and "z" in attrs
        grid = "u_values" in attrs and "z_max" in attrs
        if single == grid:
            raise serializers.ValidationError(
                "Give either u and z (one instance) or u_values and z_max (a calibration grid)"
            )
        field = attrs["field"]
        if attrs["embedding"] >= field.degree:
            raise serializers.ValidationError({"embedding": "Embedding index out of range"})
        attrs["u_list"] = [element(field, x) for x in attrs["u_list"]]
        attrs["mode"] = "instance" if single else "calibration"
        if single:
            attrs["u"] = element(field, attrs["u"])
            if len(attrs["z"]) != len(attrs["u_list"]):
                raise serializers.ValidationError({"z": "z and u_list differ in length"})
        else:
            attrs["u_values"] = [element(field, x) for x in attrs["u_values"]]
        return attrs


class SUnitInputSerializer(serializers.Serializer):
    instance = SUnitInstanceField()
    box = serializers.IntegerField(min_value=0)


class SweepSerializer(serializers.Serializer):
    base = _shape()
    n_max = serializers.IntegerField(min_value=1)


class MixExactInputSerializer(ActionInputSerializer):
    functions = serializers.ListField(child=TrigPolynomialField(), min_length=2)
    shapes = serializers.ListField(child=_shape(), min_length=1, required=False)
    sweep = SweepSerializer(required=False)
    separation = serializers.BooleanField(default=False)
    fit = serializers.ChoiceField(choices=list(MODELS), required=False, allow_null=True)

    def validate(self, attrs):
        if ("shapes" in attrs) == ("sweep" in attrs):
            raise serializers.ValidationError("Give exactly one of shapes or sweep")
        action = attrs["action"]
        if "sweep" in attrs:
            base, n_max = attrs["sweep"]["base"], attrs["sweep"]["n_max"]
            attrs["shapes"] = [[[n * v for v in z] for z in base] for n in range(1, n_max + 1)]
            attrs["steps"] = list(range(1, n_max + 1))
        else:
            attrs["steps"] = None
        for f in attrs["functions"]:
            if f.dim != action.dim:
                raise serializers.ValidationError(
                    {"functions": f"A function on T^{f.dim} cannot pair with an action on T^{action.dim}"}
                )
        for shape in attrs["shapes"]:
            if len(shape) != len(attrs["functions"]):
                raise serializers.ValidationError(
                    {"shapes": "Every shape needs one vector per function"}
                )
            _check_rank(action, shape, "shapes")
        return attrs


class MonteCarloCaseSerializer(serializers.Serializer):
    words = serializers.ListField(child=_vector(), min_length=1)
    expected = serializers.ChoiceField(choices=MC_EXPECTATIONS, default="none")


class MixMonteCarloInputSerializer(serializers.Serializer):
    heis_action = HeisActionField()
    functions = serializers.ListField(child=HolderFunctionField(), min_length=1)
    cases = MonteCarloCaseSerializer(many=True)
    samples = serializers.IntegerField(min_value=MIN_SAMPLES)
    chunk_size = serializers.IntegerField(min_value=1, required=False)
    sigmas = serializers.FloatField(min_value=0, default=3.0)

    def validate(self, attrs):
        action, functions = attrs["heis_action"], attrs["functions"]
        for index, case in enumerate(attrs["cases"]):
            if len(case["words"]) != len(functions):
                raise serializers.ValidationError(
                    {"cases": f"Case {index} needs one word per function"}
                )
            _check_rank(action, case["words"], "cases")
            if case["expected"] == "square" and (
                len(functions) != 2
                or functions[0].to_json() != functions[1].to_json()
                or case["words"][0] != case["words"][1]
            ):
                raise serializers.ValidationError(
                    {"cases": "The square expectation needs the same function under the same word twice"}
                )
        return attrs


class ShapeInputSerializer(ActionInputSerializer):
    shape = _shape()
    n_max = serializers.IntegerField(min_value=1)
    functions = serializers.ListField(child=TrigPolynomialField(), min_length=2, required=False)

    def validate(self, attrs):
        _check_rank(attrs["action"], attrs["shape"], "shape")
        functions = attrs.get("functions")
        if functions is not None and len(functions) != len(attrs["shape"]):
            raise serializers.ValidationError({"functions": "One function per shape vector"})
        return attrs


class BoxInstanceSerializer(serializers.Serializer):
    boxmap = BoxMapField()
    projection = ProjectionField(required=False)
    delta = FractionField(required=False)


class BoxSuiteSerializer(serializers.Serializer):
    algebraic = serializers.IntegerField(min_value=0, default=50)
    rational = serializers.IntegerField(min_value=0, default=10)
    side = serializers.FloatField(min_value=1, default=10**6)


class BoxMapInputSerializer(serializers.Serializer):
    instances = BoxInstanceSerializer(many=True, required=False)
    suite = BoxSuiteSerializer(required=False)
    delta = FractionField(default=Fraction(1, 20))
    params = serializers.DictField(required=False)
    samples = serializers.IntegerField(min_value=MIN_SAMPLES, default=20000)
    trials = serializers.IntegerField(min_value=1, default=3)
    u_list = serializers.ListField(child=_point(), required=False)
    g_list = serializers.ListField(child=_point(), required=False)

    def validate(self, attrs):
        if ("u_list" in attrs) != ("g_list" in attrs):
            raise serializers.ValidationError("u_list and g_list go together")
        if "u_list" in attrs and len(attrs["u_list"]) != len(attrs["g_list"]):
            raise serializers.ValidationError("u_list and g_list differ in length")
        if not attrs.get("instances") and "suite" not in attrs:
            raise serializers.ValidationError("Give instances, a suite, or both")
        return attrs


class CoboundaryInputSerializer(serializers.Serializer):
    action = ActionField()
    phi = TrigPolynomialField()
    constants = serializers.ListField(
        child=FractionField(), min_length=2, max_length=2, default=lambda: [Fraction(0)] * 2
    )


class SampledInputSerializer(serializers.Serializer):
    radius = serializers.IntegerField(min_value=1)
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=1)
    spread = serializers.IntegerField(min_value=1, default=3)


class CocycleInputSerializer(serializers.Serializer):
    cocycle = CocycleField(required=False)
    coboundary = CoboundaryInputSerializer(required=False)
    action = ActionField(required=False)
    telescoping = serializers.ListField(
        child=serializers.ListField(
            child=serializers.IntegerField(min_value=0), min_length=2, max_length=2
        ),
        required=False,
    )
    window = serializers.IntegerField(min_value=1, required=False)
    solution_space = serializers.ListField(
        child=serializers.IntegerField(min_value=1), required=False
    )
    sampled = SampledInputSerializer(required=False)

    def validate(self, attrs):
        if "cocycle" in attrs and "coboundary" in attrs:
            raise serializers.ValidationError("Give a cocycle or a coboundary, not both")
        if not any(key in attrs for key in ("cocycle", "coboundary", "solution_space", "sampled")):
            raise serializers.ValidationError("Nothing to check")
        if "coboundary" in attrs:
            spec = attrs["coboundary"]
            if spec["action"].rank != 2:
                raise serializers.ValidationError({"coboundary": "Cocycles need a rank-2 action"})
            if spec["phi"].dim != spec["action"].dim:
                raise serializers.ValidationError({"coboundary": "phi and the action differ in dimension"})
        action = attrs.get("action")
        if action is None and "cocycle" in attrs:
            action = attrs["cocycle"].action
        if action is None and "coboundary" in attrs:
            action = attrs["coboundary"]["action"]
        if ("solution_space" in attrs or "sampled" in attrs) and action is None:
            raise serializers.ValidationError({"action": "Solution-space checks need an action"})
        if action is not None and action.rank != 2:
            raise serializers.ValidationError({"action": "Cocycles need a rank-2 action"})
        attrs["action"] = action
        return attrs


INPUT_SERIALIZERS = {
    "spectrum": ActionInputSerializer,
    "ergodic": ActionInputSerializer,
    "anosov": AnosovInputSerializer,
    "lyapunov-constant": LyapunovInputSerializer,
    "height": HeightInputSerializer,
    "waldschmidt": WaldschmidtInputSerializer,
    "sunit-search": SUnitInputSerializer,
    "mix-exact": MixExactInputSerializer,
    "mix-mc": MixMonteCarloInputSerializer,
    "shape": ShapeInputSerializer,
    "boxmap-check": BoxMapInputSerializer,
    "cocycle": CocycleInputSerializer,
}


class BudgetSerializer(serializers.Serializer):
    enumeration = serializers.IntegerField(min_value=1, required=False)
    samples = serializers.IntegerField(min_value=1, required=False)


class OutputSerializer(serializers.Serializer):
    path = serializers.CharField(required=False)
    format = serializers.ChoiceField(choices=FORMATS, required=False)


class ExperimentConfigSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=COMMANDS)
    inputs = serializers.DictField()
    precision = serializers.IntegerField(min_value=16, required=False)
    seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, required=False)
    jobs = serializers.IntegerField(min_value=1, required=False)
    budget = BudgetSerializer(required=False)
    output = OutputSerializer(required=False)

    def validate_precision(self, value):
        cap = get_setting("PRECISION_CAP_BITS")
        if value > cap:
            raise serializers.ValidationError(f"Precision above the {cap}-bit cap")
        return value

    def validate(self, attrs):
        inputs = INPUT_SERIALIZERS[attrs["command"]](data=attrs["inputs"])
        if not inputs.is_valid():
            raise serializers.ValidationError({"inputs": inputs.errors})
        attrs["parsed"] = inputs.validated_data
        return attrs
