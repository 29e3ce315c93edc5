from django import forms
from django.core.exceptions import ValidationError

from recommender.hyperparams import SCALE_MODES, HyperParams, parse_variant
from core.exceptions import FlagError

BOOLEAN_TEXT = {'1': True, 'true': True, 'yes': True, 'on': True,
                '0': False, 'false': False, 'no': False, 'off': False}


class FlexibleBooleanField(forms.Field):
    """Accepts true/false, yes/no, on/off, 1/0 (any case) or a real bool."""

    def to_python(self, value):
        if value in (None, ''):
            return None
        if isinstance(value, bool):
            return value
        key = str(value).strip().lower()
        if key not in BOOLEAN_TEXT:
            raise ValidationError(f"'{value}' is not a boolean", code='invalid_boolean')
        return BOOLEAN_TEXT[key]


class HyperParamsForm(forms.Form):
    """
    Validates textual hyperparameters (config file, environment, flags)
    before any file is touched. Missing fields fall back to HyperParams defaults.
    """
    d = forms.IntegerField(required=False, min_value=1)
    n = forms.IntegerField(required=False, min_value=1)
    b = forms.IntegerField(required=False, min_value=1)
    variant = forms.CharField(required=False)
    use_position_embeddings = FlexibleBooleanField(required=False)
    use_pad_mask = FlexibleBooleanField(required=False)
    attention_scale_mode = forms.CharField(required=False)
    lr = forms.FloatField(required=False, min_value=0.0)
    epochs = forms.IntegerField(required=False, min_value=1)
    batch_size = forms.IntegerField(required=False, min_value=1)
    seed = forms.IntegerField(required=False, min_value=0)

    def clean_variant(self):
        value = self.cleaned_data.get('variant')
        if not value:
            return None
        try:
            return parse_variant(value)
        except FlagError as exc:
            raise ValidationError(str(exc), code='invalid_variant')

    def clean_attention_scale_mode(self):
        value = self.cleaned_data.get('attention_scale_mode')
        if not value:
            return None
        value = value.strip().lower().replace('-', '_')
        if value not in SCALE_MODES:
            raise ValidationError(f"scale must be one of {', '.join(SCALE_MODES)}", code='invalid_scale')
        return value

    def clean(self):
        cleaned = super().clean()
        defaults = HyperParams()
        d = cleaned.get('d') or defaults.d
        b = cleaned.get('b') or defaults.b
        if d % b:
            raise ValidationError(f"d={d} must be divisible by the head count b={b}", code='indivisible_heads')
        return cleaned

    def hyperparams(self, base=None):
        base = base or HyperParams()
        changes = {
            key: value for key, value in self.cleaned_data.items()
            if key in HyperParamsForm.base_fields and value is not None
        }
        return base.with_changes(**changes)


class TrainConfigForm(HyperParamsForm):
    shuffle_seed = forms.IntegerField(required=False, min_value=0)
    checkpoint_path = forms.CharField(required=False)
    log_every = forms.IntegerField(required=False, min_value=1)
    validate = FlexibleBooleanField(required=False)
    threads = forms.IntegerField(required=False, min_value=1)


HYPERPARAM_KEYS = tuple(HyperParamsForm.base_fields)
TRAIN_KEYS = tuple(TrainConfigForm.base_fields)


def form_errors(form):
    """Flatten form errors into one line for command output."""
    parts = []
    for field, errors in form.errors.items():
        label = 'config' if field == '__all__' else field
        parts.append(f"{label}: {' '.join(errors)}")
    return '; '.join(parts)
