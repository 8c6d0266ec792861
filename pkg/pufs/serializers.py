import numpy as np
from rest_framework import serializers
from rest_framework.renderers import JSONRenderer

from .bits import bits_to_string
from .models import (
    EnvCondition,
    Fault,
    FaultKind,
    FaultSite,
    FaultSpec,
    FeedbackConfig,
    PufCategory,
    PufInstance,
    SiteKind,
    Tap,
    VariationModel,
)
from .simulation import param_shapes


class ArrayField(serializers.Field):
    """A numpy array carried as nested JSON lists."""

    def to_representation(self, value):
        return np.asarray(value).tolist()

    def to_internal_value(self, data):
        try:
            array = np.asarray(data, dtype=np.float64)
        except (TypeError, ValueError):
            raise serializers.ValidationError("Invalid numeric array")
        if not np.all(np.isfinite(array)):
            raise serializers.ValidationError("Array values must be finite")
        return array


class VariationModelSerializer(serializers.Serializer):
    mu = serializers.FloatField(min_value=0.0)
    sigma_random = serializers.FloatField(min_value=0.0)
    sigma_systematic = serializers.FloatField(min_value=0.0)
    jitter_sigma = serializers.FloatField(min_value=0.0)

    def validate_mu(self, value):
        if value <= 0:
            raise serializers.ValidationError("Nominal delay must be positive")
        return value

    def create(self, validated_data):
        return VariationModel(**validated_data)


class EnvConditionSerializer(serializers.Serializer):
    label = serializers.CharField(max_length=64)
    delay_scale = serializers.FloatField()

    def validate(self, data):
        if data["delay_scale"] <= 0:
            raise serializers.ValidationError("delay_scale must be positive")
        if data["label"] == "nominal" and data["delay_scale"] != 1.0:
            raise serializers.ValidationError("The nominal condition has delay_scale 1.0")
        return data

    def create(self, validated_data):
        return EnvCondition(**validated_data)


class PufInstanceSerializer(serializers.Serializer):
    instance_id = serializers.CharField(read_only=True)
    category = serializers.ChoiceField(choices=PufCategory.choices)
    challenge_width = serializers.IntegerField(min_value=1)
    response_width = serializers.IntegerField(min_value=1)
    lot_seed = serializers.IntegerField(min_value=0)
    instance_seed = serializers.IntegerField(min_value=0)
    design = serializers.IntegerField(min_value=0, allow_null=True, default=None)
    variation = VariationModelSerializer()
    params = serializers.DictField(child=ArrayField())

    def validate(self, data):
        category = PufCategory(data["category"])
        n_c, n = data["challenge_width"], data["response_width"]
        if category == PufCategory.BUTTERFLY:
            expected = {"mismatch": (n, n_c + 1), "metastability_sigma": (n,)}
        else:
            expected = {"delays": param_shapes(category, n_c, n)}
        params = data["params"]
        if set(params) != set(expected):
            raise serializers.ValidationError(
                f"{category} parameters must be exactly {sorted(expected)}"
            )
        for name, shape in expected.items():
            if params[name].shape != tuple(shape):
                raise serializers.ValidationError(f"{name} must have shape {tuple(shape)}")
        if category != PufCategory.BUTTERFLY and np.any(params["delays"] <= 0):
            raise serializers.ValidationError("Delays must be positive")
        return data

    def create(self, validated_data):
        return PufInstance(
            category=PufCategory(validated_data["category"]),
            challenge_width=validated_data["challenge_width"],
            response_width=validated_data["response_width"],
            variation=VariationModel(**validated_data["variation"]),
            lot_seed=validated_data["lot_seed"],
            instance_seed=validated_data["instance_seed"],
            params=dict(validated_data["params"]),
            design=validated_data.get("design"),
        )


class FeedbackConfigSerializer(serializers.Serializer):
    taps = serializers.ListField(
        child=serializers.ListField(
            child=serializers.IntegerField(min_value=0), min_length=3, max_length=3
        ),
        allow_empty=True,
    )

    def validate_taps(self, value):
        targets = [tap[2] for tap in value]
        if len(set(targets)) != len(targets):
            raise serializers.ValidationError("Feedback target positions must be distinct")
        return value

    def create(self, validated_data):
        return FeedbackConfig(tuple(Tap(*tap) for tap in validated_data["taps"]))


class FaultSerializer(serializers.Serializer):
    site = serializers.ChoiceField(choices=SiteKind.choices, source="site.kind")
    index = serializers.IntegerField(min_value=0, source="site.index")
    kind = serializers.ChoiceField(choices=FaultKind.choices)


class FaultSpecSerializer(serializers.Serializer):
    faults = FaultSerializer(many=True)

    def validate_faults(self, value):
        sites = [(item["site"]["kind"], item["site"]["index"]) for item in value]
        if len(set(sites)) != len(sites):
            raise serializers.ValidationError("At most one fault per site")
        return value

    def create(self, validated_data):
        return FaultSpec(
            tuple(
                Fault(FaultSite(SiteKind(item["site"]["kind"]), item["site"]["index"]), FaultKind(item["kind"]))
                for item in validated_data["faults"]
            )
        )


class ResponseModeSerializer(serializers.Serializer):
    tag = serializers.CharField(source="kind")
    transient_len = serializers.IntegerField(allow_null=True)
    period = serializers.IntegerField(allow_null=True)


class TrajectoryRecordSerializer(serializers.Serializer):
    """One JSON-lines record per held challenge; ``mode`` is present once classified."""

    challenge = serializers.CharField()
    cycles = serializers.IntegerField()
    mode = ResponseModeSerializer(required=False)
    responses = serializers.ListField(child=serializers.CharField())


def trajectory_record(traj, mode=None) -> dict:
    record = {
        "challenge": bits_to_string(traj.challenge),
        "cycles": traj.cycles,
        "responses": traj.response_strings(),
    }
    if mode is not None:
        record["mode"] = mode
    return TrajectoryRecordSerializer(record).data


def render_json_lines(records) -> bytes:
    renderer = JSONRenderer()
    return b"".join(renderer.render(record) + b"\n" for record in records)


def dump_instance(inst: PufInstance) -> dict:
    return PufInstanceSerializer(inst).data


def load_instance(data) -> PufInstance:
    serializer = PufInstanceSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def instance_summary(inst: PufInstance) -> dict:
    """Everything that regenerates ``inst`` from its seeds, without the sampled arrays."""
    return {
        "instance_id": inst.instance_id,
        "category": str(inst.category),
        "challenge_width": inst.challenge_width,
        "response_width": inst.response_width,
        "lot_seed": inst.lot_seed,
        "instance_seed": inst.instance_seed,
        "design": inst.design,
        "variation": VariationModelSerializer(inst.variation).data,
    }


def dump_fault_spec(spec: FaultSpec) -> list:
    return FaultSpecSerializer(spec).data["faults"]


def load_fault_spec(data) -> FaultSpec:
    serializer = FaultSpecSerializer(data={"faults": data})
    serializer.is_valid(raise_exception=True)
    return serializer.save()
