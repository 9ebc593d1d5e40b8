from fractions import Fraction

from werkzeug.datastructures import MultiDict
from wtforms import BooleanField, Field, Form, IntegerField, StringField
from wtforms import FloatField as BaseFloatField
from wtforms.validators import InputRequired, NumberRange, Optional, ValidationError

from app import config


# Custom FloatField that also accepts exact fractions such as "2/3"
class FloatField(BaseFloatField):
    """
    FloatField that parses plain decimals and fractions, and leaves data as None
    for empty input so Optional() fields fall back to their default.
    """
    def process_formdata(self, valuelist):
        if not valuelist:
            return

        value = str(valuelist[0]).strip()
        if value == '':
            self.data = None
            return

        try:
            self.data = float(Fraction(value)) if '/' in value else float(value)
        except (ValueError, ZeroDivisionError):
            self.data = None
            raise ValueError(self.gettext('Not a valid float value'))


class ListField(Field):
    """Comma-separated list of numbers, e.g. "100,120,140"."""
    def __init__(self, label=None, validators=None, coerce=float, **kwargs):
        self.coerce = coerce
        super(ListField, self).__init__(label, validators, **kwargs)

    def _value(self):
        return ','.join(str(v) for v in self.data) if self.data else ''

    def process_formdata(self, valuelist):
        if not valuelist:
            return
        items = []
        for raw in valuelist:
            items.extend(part.strip() for part in str(raw).split(',') if part.strip())
        try:
            self.data = [self.coerce(item) for item in items]
        except ValueError:
            self.data = None
            raise ValueError(self.gettext('Not a valid list of numbers'))


class Positive(object):
    """Validates a strictly positive number"""
    def __init__(self, message=None):
        self.message = message

    def __call__(self, form, field):
        if field.data is None or not field.data > 0:
            raise ValidationError(self.message or field.gettext('Number must be greater than 0.'))


def _form_key(key):
    return str(key).replace('-', '_')


def _form_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ','.join(str(v) for v in value)
    return str(value)


class ParameterForm(Form):
    """Base form over merged command options (flags over config file over defaults)"""
    omega = FloatField('omega', validators=[Optional(), Positive()], default=1.0)
    omega0 = FloatField('omega0', validators=[Optional(), NumberRange(min=0)], default=1.0)
    workers = IntegerField('workers', validators=[Optional(), NumberRange(min=1)])
    emit_plot = BooleanField('emit-plot', default=False, false_values=(False, 'false', '0', ''))

    def __init__(self, options=None, **kwargs):
        super(ParameterForm, self).__init__(self.process_data(options or {}), **kwargs)

    def process_data(self, options):
        """Turn a mapping of option values (any key style, native types) into form data"""
        data = MultiDict()
        for key, value in options.items():
            if value is None:
                continue
            data.add(_form_key(key), _form_value(value))
        return data

    @property
    def error_text(self):
        return '; '.join(f"--{name.replace('_', '-')}: {' '.join(errors)}"
                         for name, errors in self.errors.items())


class SweepForm(ParameterForm):
    """Coupling grid shared by scan, exponents and inline collapse runs"""
    gamma_min = FloatField('gamma-min', validators=[Optional(), NumberRange(min=0)], default=0.5)
    gamma_max = FloatField('gamma-max', validators=[Optional(), NumberRange(min=0)], default=0.6)
    dgamma = FloatField('dgamma', validators=[Optional(), Positive()], default=0.001)
    nmax = IntegerField('nmax', validators=[Optional(), NumberRange(min=0)], default=8)
    refine = BooleanField('refine', default=False, false_values=(False, 'false', '0', ''))

    def validate_gamma_max(self, field):
        if self.gamma_min.data is not None and field.data is not None and field.data <= self.gamma_min.data:
            raise ValidationError('must be greater than --gamma-min.')

    def validate_dgamma(self, field):
        if None in (self.gamma_min.data, self.gamma_max.data, field.data):
            return
        span = self.gamma_max.data - self.gamma_min.data
        if span > 0 and field.data > span / 10 * (1 + 1e-9):
            raise ValidationError('must leave at least 10 steps between --gamma-min and --gamma-max.')


class ScanForm(SweepForm):
    n_atoms = IntegerField('n-atoms', validators=[InputRequired(), NumberRange(min=1)])


class ExponentsForm(SweepForm):
    n_list = ListField('n-list', coerce=int, validators=[InputRequired()])

    def validate_n_list(self, field):
        if not field.data or len(set(field.data)) < 2:
            raise ValidationError('needs at least two distinct atom numbers for a scaling fit.')
        if min(field.data) < 1:
            raise ValidationError('atom numbers must be positive.')


class CollapseForm(SweepForm):
    nu = FloatField('nu', validators=[Optional(), Positive()], default=2 / 3)
    scan_dir = StringField('scan-dir', validators=[Optional()])
    n_list = ListField('n-list', coerce=int, validators=[Optional()])
    x_limit = FloatField('x-limit', validators=[Optional(), Positive()], default=2.0)

    def validate(self, extra_validators=None):
        valid = super(CollapseForm, self).validate(extra_validators)
        if not self.scan_dir.data and not self.n_list.data:
            self.n_list.errors = list(self.n_list.errors) + ['either --scan-dir or --n-list is required.']
            return False
        return valid

    def validate_n_list(self, field):
        if field.data and min(field.data) < 1:
            raise ValidationError('atom numbers must be positive.')


class ConvergeForm(ParameterForm):
    n_atoms = IntegerField('n-atoms', validators=[InputRequired(), NumberRange(min=1)])
    gamma = FloatField('gamma', validators=[InputRequired(), NumberRange(min=0)])
    tolerance = FloatField('tolerance', validators=[Optional(), Positive()],
                           default=lambda: config["DELTA_P_TOLERANCE"])
    nmax_start = IntegerField('nmax-start', validators=[Optional(), NumberRange(min=0)], default=0)
    nmax_ceiling = IntegerField('nmax-ceiling', validators=[Optional(), NumberRange(min=0)], default=40)

    def validate_nmax_ceiling(self, field):
        if self.nmax_start.data is not None and field.data is not None and field.data < self.nmax_start.data:
            raise ValidationError('must not be below --nmax-start.')


class OracleCheckForm(ParameterForm):
    n_atoms = IntegerField('n-atoms', validators=[InputRequired(), NumberRange(min=1)])
    gamma_list = ListField('gamma-list', coerce=float, validators=[InputRequired()])
    cutoff = IntegerField('cutoff', validators=[Optional(), NumberRange(min=1)])
    nmax = IntegerField('nmax', validators=[Optional(), NumberRange(min=0)], default=40)

    def validate_n_atoms(self, field):
        limit = config["ORACLE_MAX_ATOMS"]
        if field.data is not None and field.data > limit:
            raise ValidationError(f'the Fock oracle is limited to N <= {limit}.')

    def validate_gamma_list(self, field):
        if not field.data:
            raise ValidationError('needs at least one coupling.')
        if min(field.data) < 0:
            raise ValidationError('couplings must be non-negative.')
