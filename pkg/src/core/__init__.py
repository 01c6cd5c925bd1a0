"""Dense linear algebra, state factories and the shared error hierarchy."""
