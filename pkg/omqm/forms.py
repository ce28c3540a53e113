import copy
import json
import math
import os

from wtforms import Field, Form, FormField, StringField, validators

from .omcore import FEIGENBAUM_DELTA, FRACTAL_DIMENSION


CONFIG_ENV = 'OMQM_CONFIG'
OUTPUT_FORMATS = ('json', 'csv', 'svg')


class ConfigError(ValueError):
    """Configuration could not be resolved. `errors` mirrors WTForms form.errors."""

    def __init__(self, errors):
        super().__init__(errors)
        self.errors = errors


def _to_float(value):
    if isinstance(value, bool):
        raise TypeError('booleans are not numbers')
    value = float(value)
    if not math.isfinite(value):
        raise ValueError('not finite')
    return value


def _to_int(value):
    if isinstance(value, bool):
        raise TypeError('booleans are not integers')
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError('not integral')
        return int(value)
    if isinstance(value, str):
        return int(value.strip())
    return int(value)


def _to_formats(value):
    if isinstance(value, str):
        value = value.split(',')
    return [str(v).strip().lower() for v in value if str(v).strip()]


class CoercedField(Field):
    """Field whose data is given as Python values, coerced when the form is built.

    Missing values are an error unless the field is optional.
    """

    coerce = staticmethod(lambda value: value)
    kind = 'value'

    def __init__(self, label=None, validators=None, optional=False, **kwargs):
        super().__init__(label, validators, **kwargs)
        self.optional = optional

    def process(self, *args, **kwargs):
        super().process(*args, **kwargs)
        if self.data is None:
            if not self.optional:
                self.process_errors.append('This field is required.')
            return
        try:
            self.data = self.coerce(self.data)
        except (TypeError, ValueError):
            self.process_errors.append(f'Not a valid {self.kind}: {self.data!r}')
            self.data = None


class FloatValueField(CoercedField):
    coerce = staticmethod(_to_float)
    kind = 'number'


class IntegerValueField(CoercedField):
    coerce = staticmethod(_to_int)
    kind = 'integer'


class FormatsField(CoercedField):
    coerce = staticmethod(_to_formats)
    kind = 'format list'


class InRange(validators.NumberRange):
    """NumberRange that leaves missing optional values alone."""

    def __call__(self, form, field):
        if field.data is not None:
            super().__call__(form, field)


class OneOf(validators.AnyOf):

    def __call__(self, form, field):
        if field.data is not None:
            super().__call__(form, field)


class StrictlyPositive:

    def __init__(self, message=None):
        self.message = message or 'Must be greater than 0.'

    def __call__(self, form, field):
        if field.data is not None and not field.data > 0:
            raise validators.ValidationError(self.message)


class KnownFormats:

    def __call__(self, form, field):
        unknown = [f for f in field.data or [] if f not in OUTPUT_FORMATS]
        if unknown:
            raise validators.ValidationError(f'Unknown output formats {unknown}, expected a subset of {list(OUTPUT_FORMATS)}.')


class NotBlank:

    def __call__(self, form, field):
        if field.data is not None and not str(field.data).strip():
            raise validators.ValidationError('Must not be blank.')


class RunForm(Form):
    """Seed, output directory and artifact formats shared by all commands."""

    seed = IntegerValueField(validators=[InRange(min=0, max=2 ** 63 - 1)])
    out_dir = StringField(validators=[NotBlank()])
    formats = FormatsField(validators=[KnownFormats()])


class ConstantsForm(Form):
    s_tilde_sign = IntegerValueField(validators=[OneOf([1, -1])])
    alpha_tilde = FloatValueField(optional=True, validators=[StrictlyPositive()])
    D = FloatValueField(validators=[StrictlyPositive()])
    delta = FloatValueField(validators=[StrictlyPositive()])


class PrecisionForm(Form):
    zero_precision = FloatValueField(validators=[InRange(min=1e-8, max=1e-2)])
    lattice_radius = IntegerValueField(validators=[InRange(min=50, max=1000)])
    series_cutoff = IntegerValueField(validators=[InRange(min=20, max=400)])
    table_bound = IntegerValueField(validators=[InRange(min=1, max=10 ** 7)])


class CollapseForm(Form):
    l1 = IntegerValueField(validators=[InRange(min=0)])
    n = IntegerValueField(validators=[InRange(min=1)])
    path = StringField(validators=[OneOf(['key', 'zeta', 'both'])])


class BornForm(Form):
    l1 = IntegerValueField(validators=[InRange(min=0)])
    n = IntegerValueField(validators=[InRange(min=1)])
    sigma = FloatValueField(validators=[StrictlyPositive()])
    samples = IntegerValueField(validators=[InRange(min=1000, max=10 ** 8)])
    centering = StringField(validators=[OneOf(['cell', 'circle'])])


class EPRForm(Form):
    l1a = IntegerValueField(validators=[InRange(min=0)])
    l1b = IntegerValueField(validators=[InRange(min=0)])
    b = IntegerValueField(validators=[InRange(min=0)])
    n = IntegerValueField(validators=[InRange(min=1)])
    parity = IntegerValueField(validators=[OneOf([1, -1])])
    phi_re = FloatValueField()
    phi_im = FloatValueField()


class WeierstrassForm(Form):
    tau_re = FloatValueField()
    tau_im = FloatValueField(validators=[StrictlyPositive()])
    grid = IntegerValueField(validators=[InRange(min=1, max=200)])


class ZerosForm(Form):
    t_max = FloatValueField(validators=[StrictlyPositive(), InRange(max=120)])


class NumtheoryForm(Form):
    table_bound = IntegerValueField(validators=[InRange(min=1, max=10 ** 7)])
    rows = IntegerValueField(validators=[InRange(min=1)])
    cache = StringField()


class ChaosForm(Form):
    feigenbaum_levels = IntegerValueField(validators=[InRange(min=6, max=14)])
    a = FloatValueField()
    b = FloatValueField()
    c = FloatValueField()
    dt = FloatValueField(validators=[StrictlyPositive()])
    t_total = FloatValueField(validators=[StrictlyPositive()])
    transient = FloatValueField(validators=[InRange(min=0)])
    scaling_k = FloatValueField()


class VerifyForm(Form):
    fifty_fifty_n = IntegerValueField(validators=[InRange(min=1)])
    series_cutoff = IntegerValueField(validators=[InRange(min=2, max=10 ** 7)])
    mertens_limit = IntegerValueField(validators=[InRange(min=1)])
    dirichlet_limit = IntegerValueField(validators=[InRange(min=1)])
    fine_structure_tolerance = FloatValueField(validators=[StrictlyPositive()])


# If you want to change the default run settings, update here
default_settings = {
    'run': {'seed': 20240101, 'out_dir': 'out', 'formats': ['json', 'csv']},
    'constants': {'s_tilde_sign': 1, 'alpha_tilde': None, 'D': FRACTAL_DIMENSION, 'delta': FEIGENBAUM_DELTA},
    'precision': {'zero_precision': 1e-8, 'lattice_radius': 50, 'series_cutoff': 40, 'table_bound': 100000},
    'collapse': {'l1': 7, 'n': 2, 'path': 'both'},
    'born': {'l1': 1000, 'n': 8, 'sigma': 3.0, 'samples': 100000, 'centering': 'cell'},
    'epr': {'l1a': 100, 'l1b': 100, 'b': 10, 'n': 2, 'parity': 1, 'phi_re': 1.0, 'phi_im': 0.0},
    'weierstrass': {'tau_re': 0.0, 'tau_im': 1.0, 'grid': 16},
    'zeros': {'t_max': 30.0},
    'numtheory': {'table_bound': 100000, 'rows': 100, 'cache': None},
    'chaos': {
        'feigenbaum_levels': 10, 'a': 0.2, 'b': 0.2, 'c': 5.7, 'dt': 0.01,
        't_total': 500.0, 'transient': 50.0, 'scaling_k': 1.0},
    'verify': {
        'fifty_fifty_n': 10000, 'series_cutoff': 10 ** 6, 'mertens_limit': 100,
        'dirichlet_limit': 10000, 'fine_structure_tolerance': 0.05},
}


class RunConfigForm(Form):
    """Every configurable value of a run, one section per command."""
    run = FormField(RunForm, default=default_settings['run'])
    constants = FormField(ConstantsForm, default=default_settings['constants'])
    precision = FormField(PrecisionForm, default=default_settings['precision'])
    collapse = FormField(CollapseForm, default=default_settings['collapse'])
    born = FormField(BornForm, default=default_settings['born'])
    epr = FormField(EPRForm, default=default_settings['epr'])
    weierstrass = FormField(WeierstrassForm, default=default_settings['weierstrass'])
    zeros = FormField(ZerosForm, default=default_settings['zeros'])
    numtheory = FormField(NumtheoryForm, default=default_settings['numtheory'])
    chaos = FormField(ChaosForm, default=default_settings['chaos'])
    verify = FormField(VerifyForm, default=default_settings['verify'])


def _apply_dotted(settings, values, source):
    """Merge {'section.key': value} into nested settings, rejecting unknown keys."""
    errors = {}
    for dotted, value in values.items():
        section, _, name = str(dotted).partition('.')
        if section not in default_settings or name not in default_settings[section]:
            errors.setdefault(source, []).append(f'Unknown configuration key {dotted!r}.')
            continue
        settings[section][name] = value
    if errors:
        raise ConfigError(errors)


def load_config_file(path):
    try:
        with open(path) as f:
            values = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError({'config': [f'Could not read {path}: {e}']}) from e
    if not isinstance(values, dict):
        raise ConfigError({'config': [f'{path} must hold a JSON object of dotted keys.']})
    return values


def resolve_config(overrides=None, path=None, environ=None):
    """Defaults, then the config file (path or $OMQM_CONFIG), then explicit overrides."""
    environ = os.environ if environ is None else environ
    settings = copy.deepcopy(default_settings)
    path = path or environ.get(CONFIG_ENV)
    if path:
        _apply_dotted(settings, load_config_file(path), 'config')
    _apply_dotted(settings, {k: v for k, v in (overrides or {}).items() if v is not None}, 'arguments')

    form = RunConfigForm(**settings)
    for section in settings:
        if section not in form or set(settings[section]) - set(form[section].form._fields):
            raise ConfigError({section: ['Unknown configuration section or key.']})
    form.validate()
    if form.errors:
        raise ConfigError(form.errors)
    return form.data
