def check_positive(value, name):
    if not value > 0:
        raise ValueError("%s should be positive, %r was passed" % (name, value))
    return value


def check_unit_interval(value, name):
    if not 0. <= value <= 1.:
        raise ValueError("%s should be in [0, 1], %r was passed" % (name, value))
    return value
