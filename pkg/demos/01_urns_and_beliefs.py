"""Two urns, one ball: Bayes, biased updating and noisy choice."""
import numpy as np

from obslearn import (
    InformationStructure,
    Signal,
    State,
    bayes_posterior,
    enumerate_structures,
    grether_posterior,
    logit_choice_prob,
    social_posterior,
    social_signal_likelihoods,
)

# box X holds 7 white balls out of 10, box Y holds 6 black
s = InformationStructure.from_thetas(0.7, 0.6)
print("structure", s)
print("P(X | white), Bayes:     ", bayes_posterior(s, Signal.WHITE))

# an under-inferring subject (c < 1) moves less than Bayes would
for c in (1.0, 0.888, 0.5, 0.0):
    print(f"P(X | white), c={c:<5}:   {grether_posterior(s, Signal.WHITE, c):.4f}")

# a belief of 0.75 with a 12 dollar stake still leaves some chance of picking Y
print("P(choose X | belief 0.75):", logit_choice_prob(0.472, 0.75, 12))

# what is another person's guess of X worth?  it depends on how carefully
# you think they chose
for beta_tilde in (np.inf, 0.5, 0.038, 0.0):
    lik = social_signal_likelihoods(s, beta_tilde, 0.888)
    post = social_posterior(s, State.X, 0.888, beta_tilde)
    print(f"beta_tilde={beta_tilde:<6} P(guess X|X)={lik.x_given_X:.3f}  P(X | guess X)={post:.4f}")

# the 21 structures used in the sessions
print(len(enumerate_structures()), "structures:", " ".join(str(t) for t in enumerate_structures()))
